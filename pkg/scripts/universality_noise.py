"""Seed-to-seed spread of the universality KS statistic at fixed (L, fields)."""
import argparse

import numpy as np

from critlab.torus_field_lab import universality_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=float, nargs="+", default=[15, 30])
    ap.add_argument("--fields", type=int, default=300)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--base-seed", type=int, default=90_000)
    args = ap.parse_args()
    for L in args.L:
        ks = [universality_check(2, L, 1.0, args.fields, seed=args.base_seed + i)[0] for i in range(args.seeds)]
        print(f"L={L:g}: KS " + " ".join(f"{k:.4f}" for k in ks) + f"  mean {np.mean(ks):.4f} sd {np.std(ks, ddof=1):.4f}",
              flush=True)


if __name__ == "__main__":
    main()
