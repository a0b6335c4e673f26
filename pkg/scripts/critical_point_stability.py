"""Does doubling the Newton seed grid change the number of critical points found?"""
import argparse
import time

from critlab._streams import rng_for
from critlab.spectral_constants import omega_params
from critlab.torus_field_lab import build_spectrum, default_grid_n, find_critical_points, sample_field


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=float, nargs="+", default=[20.0, 30.0])
    ap.add_argument("--fields", type=int, default=100)
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()
    for L in args.L:
        sp = build_spectrum(2, L)
        om = omega_params(2, L, 1.0).omega
        g = default_grid_n(sp)
        changed = bad_euler = 0
        t0 = time.time()
        for i in range(args.fields):
            f = sample_field(sp, om, rng_for(args.seed, i).integers(2**62))
            a = find_critical_points(f)
            b = find_critical_points(f, grid_n=2 * g)
            bad_euler += a.euler_sum != 0
            if len(a) != len(b):
                changed += 1
                print(f"L={L:g} field {i}: {len(a)} -> {len(b)} (euler {a.euler_sum}, {b.euler_sum})", flush=True)
        print(f"L={L:g} grid_n={g}: count changed on {changed}/{args.fields} fields, "
              f"nonzero Euler sum on {bad_euler}, {time.time() - t0:.1f} s", flush=True)


if __name__ == "__main__":
    main()
