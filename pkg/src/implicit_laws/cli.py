"""Experiments on implicit constitutive laws: checks, selections and 1D solves.

Exit codes: 0 success, 1 verification or property failure, 2 solver
non-convergence, 3 configuration error.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments
from .config import build_solve_config, parse_config, parse_config_text
from .errors import (CompatibilityError, ConfigError, DimensionError, ParameterDomainError,
                     PropertyViolation, SelectionFailure, SolverError, StepFailure)
from .fem import energy_report, solve_elliptic, solve_parabolic, sweep_eps, sweep_mesh
from .io import write_csv, write_manifest
from .models import make_builtin
from .selector import SchemeConfig, estimate_constants, selection_curve
from .verifier import SampleSpec, verify_model

EXIT_OK, EXIT_FAILED, EXIT_NO_CONVERGENCE, EXIT_CONFIG = 0, 1, 2, 3


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _range(text):
    lo, sep, hi = text.partition(":")
    try:
        return float(lo), float(hi)
    except ValueError:
        raise ConfigError(f"expected lo:hi, got {text!r}") from None


def _model_from_args(args):
    return make_builtin(args.model, **({"p": args.p} if args.p is not None else {}))


def _witness_cells(w):
    if w is None:
        return "", ""
    if isinstance(w, tuple):
        w = w[0]
    return " ".join("%.17g" % v for v in w.J.ravel()), " ".join("%.17g" % v for v in w.D.ravel())


def cmd_verify(args, out):
    spec = SampleSpec(seed=args.seed)
    if args.suite:
        path, results = experiments.run_verify_suite(out, spec)
        for role, rep, _ in results:
            print(f"[{role}] " + rep.table())
        ok = all(experiments._expected(role, rep) for role, rep, _ in results)
        return [path], {"suite": True}, EXIT_OK if ok else EXIT_FAILED
    model = _model_from_args(args)
    report = verify_model(model, spec)
    print(report.table())
    rows = []
    for e in report.entries.values():
        rows.append([e.condition, e.passed, e.worst_margin, *_witness_cells(e.witness), e.detail])
    path = write_csv(Path(out) / "verify.csv",
                     ["condition", "passed", "margin", "witness_J", "witness_D", "detail"], rows)
    code = EXIT_OK if report.all_passed() else EXIT_FAILED
    return [path], {"model": model.name, "orientation": report.orientation}, code


def cmd_curve(args, out):
    model = _model_from_args(args)
    cfg = SchemeConfig(args.scheme, args.eps)
    lo, hi = _range(args.range)
    rows = selection_curve(model, cfg, lo, hi, args.n)
    path = write_csv(Path(out) / "curve.csv", ["d", "J", "iterations", "residual", "status"],
                     [(r.d, r.J, r.iterations, r.residual, r.status) for r in rows])
    failures = sum(r.status != "ok" for r in rows)
    print(f"{cfg.label} eps={cfg.epsilon:g} on {model.name}: {len(rows)} rows, {failures} failures")
    return [path], {"model": model.name, "scheme": cfg.scheme, "eps": cfg.epsilon,
                    "range": [lo, hi], "n": args.n}, EXIT_OK if failures == 0 else EXIT_NO_CONVERGENCE


def cmd_constants(args, out):
    model = _model_from_args(args)
    cfg = SchemeConfig(args.scheme, args.eps)
    est = estimate_constants(model, cfg, args.samples, seed=args.seed, check=False)
    path = write_csv(Path(out) / "constants.csv",
                     ["model", "scheme", "eps", "mono_lower", "lip_upper", "bound", "excluded", "holds"],
                     [[model.name, cfg.scheme, cfg.epsilon, est.mono_lower, est.lip_upper, est.bound,
                       est.excluded, est.mono_lower >= (1 - 1e-6) * est.bound]])
    print(f"mono_lower {est.mono_lower:.10g}  lip_upper {est.lip_upper:.10g}  bound {est.bound:.10g}")
    code = EXIT_OK if est.mono_lower >= (1 - 1e-6) * est.bound else EXIT_FAILED
    return [path], {"model": model.name, "scheme": cfg.scheme, "eps": cfg.epsilon,
                    "samples": args.samples}, code


def _load_config(args):
    if args.config is None:
        return parse_config_text("")
    return parse_config(args.config)


def cmd_solve(args, out, values):
    cfg = build_solve_config(values)
    traj = solve_parabolic(cfg)
    mesh = cfg.mesh
    out = Path(out)
    paths = [
        write_csv(out / "u_final.csv", ["x", "u"], zip(mesh.nodes, traj.u_final)),
        write_csv(out / "J_final.csv", ["x_mid", "D", "J"],
                  zip(mesh.midpoints, np.diff(traj.u_final) / mesh.h, traj.J_final)),
        write_csv(out / "energy_ledger.csv",
                  ["step", "time", "kinetic", "increment", "dissipation", "work", "residual",
                   "newton_iterations", "min_element_dissipation"],
                  [[r.step, r.time, r.kinetic, r.increment, r.dissipation, r.work, r.residual,
                    r.newton_iterations, r.min_element_dissipation] for r in traj.energy_ledger]),
    ]
    print(f"{len(traj.energy_ledger)} steps of tau={traj.tau:.6g}; energy defect {energy_report(traj):.3e}")
    if cfg.oracle is not None:
        err = float(np.abs(traj.u_final - cfg.oracle(traj.times[-1], mesh.nodes)).max())
        print(f"max nodal error vs oracle at t={traj.times[-1]:g}: {err:.6e}")
    return paths, {}, EXIT_OK


def cmd_elliptic(args, out, values):
    cfg = build_solve_config(values)
    u, J = solve_elliptic(cfg)
    mesh = cfg.mesh
    out = Path(out)
    paths = [
        write_csv(out / "u.csv", ["x", "u"], zip(mesh.nodes, u)),
        write_csv(out / "J.csv", ["x_mid", "D", "J"], zip(mesh.midpoints, np.diff(u) / mesh.h, J)),
    ]
    if cfg.oracle is not None:
        print(f"max nodal error vs oracle: {float(np.abs(u - cfg.oracle(0.0, mesh.nodes)).max()):.6e}")
    return paths, {}, EXIT_OK


def cmd_sweep_eps(args, out, values):
    cfg = build_solve_config(values)
    eps_list = _floats(args.eps_list)
    result = sweep_eps(cfg, eps_list)
    path = write_csv(Path(out) / "sweep_eps.csv", ["eps", "distance", "status"],
                     [(r.epsilon, r.distance, r.status) for r in result.rows])
    print(f"reference eps {result.reference_eps:g}; ratios {result.ratios}; trend ok {result.trend_ok}")
    if any(r.status != "ok" for r in result.rows):
        code = EXIT_NO_CONVERGENCE
    else:
        code = EXIT_OK if result.trend_ok else EXIT_FAILED
    return [path], {"eps_list": eps_list, "reference_eps": result.reference_eps}, code


def cmd_sweep_mesh(args, out, values):
    cfg = build_solve_config(values)
    n_list = [int(v) for v in _floats(args.n_list)]
    result = sweep_mesh(cfg, n_list, args.tau_rule, steady=args.steady)
    path = write_csv(Path(out) / "sweep_mesh.csv", ["n_elements", "h", "tau", "error"],
                     [(r.n_elements, r.h, r.tau, r.error) for r in result.rows])
    order = "not available" if result.order is None else f"{result.order:.4f}"
    print(f"fitted order {order}")
    return [path], {"n_list": n_list, "tau_rule": args.tau_rule, "steady": args.steady,
                    "order": result.order}, EXIT_OK


def cmd_figure2(args, out):
    eps_list = _floats(args.eps_list)
    paths = experiments.run_figure2(eps_list, output_dir=out, count=args.n)
    print(f"wrote {len(paths)} files to {out}")
    return list(paths.values()), {"eps_list": eps_list, "n": args.n}, EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 3), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _join_ranges(argv):
    # "--range -1:1" would otherwise be read as an option
    out = []
    it = iter(argv)
    for a in it:
        if a == "--range":
            out.append("--range=" + next(it, ""))
        else:
            out.append(a)
    return out


def _global_flags(top: bool) -> argparse.ArgumentParser:
    # subcommands accept the same flags; SUPPRESS keeps them from resetting values given earlier
    def default(v):
        return v if top else argparse.SUPPRESS

    flags = _Parser(add_help=False)
    flags.add_argument("--config", type=Path, default=default(None), help="key = value run file")
    flags.add_argument("--seed", type=int, default=default(0))
    flags.add_argument("--out", type=Path, default=default(Path("out")))
    flags.add_argument("--threads", type=int, default=default(1),
                       help="recorded in the manifest; work is vectorised in one process")
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="implicit-laws", description=__doc__.splitlines()[0],
                                     parents=[_global_flags(True)])
    common = _global_flags(False)
    sub = parser.add_subparsers(dest="command", required=True)

    def model_args(p):
        p.add_argument("--model", required=True, help="catalogue id, e.g. powerlaw:p=3")
        p.add_argument("--p", type=float, default=None)

    p = sub.add_parser("verify", parents=[common], help="audit a model against the structural conditions")
    p.add_argument("--model", default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--suite", action="store_true", help="audit the whole catalogue")

    p = sub.add_parser("curve", parents=[common], help="selection curve of a scalar model")
    model_args(p)
    p.add_argument("--scheme", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--range", default="-3:3")
    p.add_argument("--n", type=int, default=601)

    p = sub.add_parser("constants", parents=[common], help="monotonicity and Lipschitz estimates")
    model_args(p)
    p.add_argument("--scheme", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--samples", type=int, default=10_000)

    sub.add_parser("solve", parents=[common], help="parabolic run from --config")
    sub.add_parser("elliptic", parents=[common], help="steady run from --config")
    p = sub.add_parser("sweep-eps", parents=[common], help="distance to a small-eps reference")
    p.add_argument("--eps-list", default="0.2,0.1,0.05")
    p = sub.add_parser("sweep-mesh", parents=[common], help="error against the oracle under refinement")
    p.add_argument("--n-list", default="16,32,64")
    p.add_argument("--tau-rule", default="h2", choices=["h2", "h", "fixed"])
    p.add_argument("--steady", action="store_true")
    p = sub.add_parser("figure2", parents=[common], help="zig-zag selection curves for all schemes")
    p.add_argument("--eps-list", default="0.1,0.3")
    p.add_argument("--n", type=int, default=601)
    return parser


_NEEDS_CONFIG = {"solve": cmd_solve, "elliptic": cmd_elliptic,
                 "sweep-eps": cmd_sweep_eps, "sweep-mesh": cmd_sweep_mesh}
_DIRECT = {"verify": cmd_verify, "curve": cmd_curve, "constants": cmd_constants, "figure2": cmd_figure2}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(_join_ranges(argv))
    start = time.perf_counter()
    try:
        if args.command == "verify" and not args.suite and args.model is None:
            raise ConfigError("verify needs --model or --suite")
        if args.command in _NEEDS_CONFIG:
            values = _load_config(args)
            outputs, extra, code = _NEEDS_CONFIG[args.command](args, args.out, values)
            resolved = {**values, **extra}
        else:
            outputs, extra, code = _DIRECT[args.command](args, args.out)
            resolved = dict(extra)
    except (ConfigError, ParameterDomainError, DimensionError, CompatibilityError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepFailure, SolverError, SelectionFailure) as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except PropertyViolation as exc:
        print(f"property violated: {exc}", file=sys.stderr)
        return EXIT_FAILED
    resolved["threads"] = args.threads
    write_manifest(Path(args.out) / f"{args.command}.manifest.json", args.command, resolved, args.seed,
                   outputs, round(time.perf_counter() - start, 6), argv)
    return code


def main(argv=None):
    sys.exit(run(argv))

