"""KS between rescaled torus critical values and sigma_{2,r} for several L."""
import argparse
import json
import time

from critlab.torus_field_lab import universality_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=float, nargs="+", default=[10, 15, 20, 30])
    ap.add_argument("--r", type=float, default=1.0)
    ap.add_argument("--fields", type=int, default=300)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    for L in args.L:
        t0 = time.time()
        ks, rep = universality_check(2, L, args.r, args.fields, seed=args.seed)
        rep["seconds"] = round(time.time() - t0, 1)
        print(json.dumps(rep, sort_keys=True), flush=True)


if __name__ == "__main__":
    main()
