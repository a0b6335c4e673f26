"""log C_m against (1/2) m log m, with the -m Stirling correction for comparison."""
import argparse
import math

from critlab.limit_law import correlation_source, growth_slope, limit_total_mass


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, nargs="+", default=[1, 2, 3, 4, 8, 16, 32])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1000)
    args = ap.parse_args()
    logs = {}
    print("m,rho,C_m,log_C_m,std_error,half_m_log_m")
    for m in args.m:
        tm = limit_total_mass(m, rho=correlation_source(m, args.samples, seed=args.seed + m))
        logs[m] = tm.log_value
        print(f"{m},{tm.info['rho']},{tm.value:.6g},{tm.log_value:.5f},{tm.std_error:.2g},{0.5 * m * math.log(m):.5f}")
    big = [m for m in args.m if m >= 4]
    if len(big) >= 2:
        y = [logs[m] for m in big]
        print(f"# slope over m={big}: {growth_slope(big, y, loglog=False):.3f}")
        print(f"# slope of log C_m + m: {growth_slope(big, [v + m for v, m in zip(y, big)], loglog=False):.3f}")


if __name__ == "__main__":
    main()
