"""Run the condition checks over the built-in catalogue and print one table per model."""
import argparse

from implicit_laws.experiments import _expected, run_verify_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/verify")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args()

    path, results = run_verify_suite(args.out)
    bad = 0
    for role, rep, seconds in results:
        ok = _expected(role, rep)
        bad += role != "info" and not ok
        print(f"{rep.model:32s} {role:15s} {'as expected' if ok else 'UNEXPECTED'}  {seconds:.2f}s")
        if not args.quiet:
            print(rep.table())
    print(path)
    raise SystemExit(1 if bad else 0)


if __name__ == "__main__":
    main()
