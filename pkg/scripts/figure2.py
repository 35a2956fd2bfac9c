"""Regenerate the zig-zag selection curves and report agreement with the Brent oracle."""
import argparse

import numpy as np

from implicit_laws.experiments import oracle_flux, run_figure2
from implicit_laws.io import read_csv
from implicit_laws.models import make_builtin


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/figure2")
    ap.add_argument("--eps", default="0.1,0.3")
    ap.add_argument("--n", type=int, default=601)
    ap.add_argument("--checks", type=int, default=20)
    args = ap.parse_args()

    eps_list = [float(e) for e in args.eps.split(",")]
    paths = run_figure2(eps_list, output_dir=args.out, count=args.n)
    model = make_builtin("zigzag")
    rng = np.random.default_rng(0)
    for key, path in paths.items():
        if key == "exact":
            continue
        scheme, eps = key
        _, rows = read_csv(path)
        picks = rng.choice(len(rows), min(args.checks, len(rows)), replace=False)
        gap = max(abs(oracle_flux(model, scheme, eps, rows[i][0]) - rows[i][1]) for i in picks)
        print(f"{path}  max |J - oracle| over {len(picks)} points = {gap:.2e}")
    print(paths["exact"])


if __name__ == "__main__":
    main()
