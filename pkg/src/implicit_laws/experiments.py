"""Reproducible experiment bundles: zig-zag selection curves and the model audit."""
from __future__ import annotations

import time
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .io import write_csv
from .models import make_builtin, zigzag_polyline
from .selector import SchemeConfig, scheme_key, selection_curve
from .verifier import SampleSpec, verify_model

FIGURE_RANGE = (-3.0, 3.0)
FIGURE_COUNT = 601


def composed_residual(model, scheme: str, eps: float):
    """Scalar j -> residual whose root is the selected flux at fixed d.

    stretch: g(j - eps d, (1 + eps^2) d - eps j)
    shear:   g(j - eps d, d - eps j)
    shift:   g(j, d) + eps (j - d)
    """
    key = scheme_key(scheme)

    def g(j, d):
        return float(model.evaluate(np.array([[j]]), np.array([[d]]))[0, 0])

    if key == "stretch":
        return lambda j, d: g(j - eps * d, (1 + eps * eps) * d - eps * j)
    if key == "shear":
        return lambda j, d: g(j - eps * d, d - eps * j)
    return lambda j, d: g(j, d) + eps * (j - d)


def oracle_flux(model, scheme: str, eps: float, d: float, bracket=(-50.0, 50.0)) -> float:
    """Root of the composed residual by Brent's method, independent of the Newton selector."""
    h = composed_residual(model, scheme, eps)
    return brentq(lambda j: h(j, d), *bracket, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def figure2_name(scheme: str, eps: float) -> str:
    return f"figure2_{scheme_key(scheme)}_eps{eps:g}.csv"


def run_figure2(eps_list=(0.1, 0.3), schemes=("stretch", "shear", "shift"), output_dir="out",
                count: int = FIGURE_COUNT, d_range=FIGURE_RANGE) -> dict:
    """Selection curves of the zig-zag law for every (scheme, eps) plus its exact graph."""
    out = Path(output_dir)
    model = make_builtin("zigzag")
    paths = {}
    for scheme in schemes:
        for eps in eps_list:
            rows = selection_curve(model, SchemeConfig(scheme, eps), d_range[0], d_range[1], count)
            path = write_csv(out / figure2_name(scheme, eps), ["d", "J", "iterations", "residual", "status"],
                             [(r.d, r.J, r.iterations, r.residual, r.status) for r in rows])
            paths[(scheme_key(scheme), float(eps))] = path
    d, j = zigzag_polyline(d_range[0], d_range[1], count)
    paths["exact"] = write_csv(out / "figure2_exact.csv", ["d", "j"], zip(d, j))
    return paths


CORE_MODELS = (
    "linear",
    "reg-power-sq-inverse:p=3",
    "activated-flux:sigma=1",
    "step-riser",
    "zigzag",
    "activated-gradient:delta=1",
)
CONTROL_MODELS = ("antimonotone", "quadratic")
INFO_MODELS = (
    "powerlaw:p=3",
    "powerlaw-inverse:p=1.5",
    "reg-power-add:p=3",
    "reg-power-add-inverse:p=3",
    "reg-power-sq:p=3",
    "linear:dim=2",
    "activated-flux:sigma=1,dim=2",
)
SUITE_COLUMNS = ["model", "role", "orientation", "G1", "G2", "G3", "G4", "G4-range", "pairwise",
                 "c1", "c2", "expected"]


def _expected(role, report) -> bool:
    if role == "core":
        return report.all_passed()
    if role == "maxwell-stefan":
        return (all(report.passed(c) for c in ("G1", "G2", "G3", "G4-range"))
                and not report.passed("G4"))
    if role == "control":
        return not report.all_passed()
    return True


def verify_suite(spec: SampleSpec = SampleSpec()):
    """Reports for the catalogue, tagged by role; returns [(role, report, seconds)]."""
    plan = ([(m, "core") for m in CORE_MODELS] + [("maxwell-stefan", "maxwell-stefan")]
            + [(m, "control") for m in CONTROL_MODELS] + [(m, "info") for m in INFO_MODELS])
    out = []
    for ident, role in plan:
        t0 = time.perf_counter()
        report = verify_model(make_builtin(ident), spec)
        out.append((role, report, time.perf_counter() - t0))
    return out


def run_verify_suite(output_dir="out", spec: SampleSpec = SampleSpec()):
    results = verify_suite(spec)
    rows = []
    for role, rep, _ in results:
        flags = [rep.entries[c].passed for c in ("G1", "G2", "G3", "G4", "G4-range", "pairwise")]
        rows.append([rep.model, role, rep.orientation, *flags, rep.empirical_c1, rep.empirical_c2,
                     _expected(role, rep)])
    path = write_csv(Path(output_dir) / "verify_suite.csv", SUITE_COLUMNS, rows)
    return path, results
