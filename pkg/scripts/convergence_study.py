"""Mesh and eps refinement studies for the manufactured and step-law problems."""
import argparse
from pathlib import Path

import numpy as np

from implicit_laws.fem import SolveConfig, build_mesh, sweep_eps, sweep_mesh
from implicit_laws.io import write_csv
from implicit_laws.models import make_builtin
from implicit_laws.selector import SchemeConfig


def heat_study(n_list):
    cfg = SolveConfig(build_mesh(n_list[0]), make_builtin("linear"), SchemeConfig("shear", 0.1), T=0.1, tau=1e-4,
                      u0=lambda x: np.sin(np.pi * x),
                      oracle=lambda t, x: np.sin(np.pi * x) * np.exp(-np.pi ** 2 * t))
    return sweep_mesh(cfg, n_list, "h2")


def p_laplace_study(n_list, eps):
    cfg = SolveConfig(build_mesh(n_list[0]), make_builtin("powerlaw:p=3"), SchemeConfig("stretch", eps),
                      f=lambda t, x: 4 * np.abs(1 - 2 * x), oracle=lambda t, x: x * (1 - x))
    return sweep_mesh(cfg, n_list, steady=True)


def step_study(eps_list):
    cfg = SolveConfig(build_mesh(64), make_builtin("step-riser"), SchemeConfig("stretch", eps_list[0]),
                      T=0.1, tau=1e-3, f=lambda t, x: 10 * np.ones_like(x))
    return sweep_eps(cfg, eps_list)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/convergence")
    ap.add_argument("--n-list", default="16,32,64,128")
    ap.add_argument("--eps-list", default="0.2,0.1,0.05,0.025")
    ap.add_argument("--p-eps", type=float, default=1e-4)
    args = ap.parse_args()
    out = Path(args.out)
    n_list = [int(n) for n in args.n_list.split(",")]
    eps_list = [float(e) for e in args.eps_list.split(",")]

    for name, sweep in (("heat", heat_study(n_list)), ("p_laplace", p_laplace_study(n_list, args.p_eps))):
        write_csv(out / f"{name}_mesh.csv", ["n", "h", "tau", "error"],
                  [(r.n_elements, r.h, r.tau, r.error) for r in sweep.rows])
        print(f"{name}: order {sweep.order:.3f}")
        for r in sweep.rows:
            print(f"  n={r.n_elements:4d}  error {r.error:.3e}")

    eps = step_study(eps_list)
    write_csv(out / "step_eps.csv", ["eps", "distance", "status"],
              [(r.epsilon, r.distance, r.status) for r in eps.rows])
    print(f"step-riser eps sweep (reference eps {eps.reference_eps:g}), monotone: {eps.trend_ok}")
    for r in eps.rows:
        print(f"  eps={r.epsilon:<6g} L2(Q) distance {r.distance:.3e}")


if __name__ == "__main__":
    main()
