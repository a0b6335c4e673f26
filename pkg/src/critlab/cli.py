"""Command line entry point: critlab {constants, rmt-verify, limit-law, simulate}.

Parameters come from flags, then a key=value config file, then defaults.
Reports are written as JSON with sorted keys; identical configuration and
seed give byte-identical CSV and JSON files.  Wall-clock time is kept out
of those files (it goes to stderr and to <name>.timing.json).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, svg
from ._streams import set_threads
from .gaussian_core import EmpiricalMeasure, Grid, gaussian_measure, ks_distance

MIN_MC_SAMPLES = 1000
NOISE_REL = 0.05
INCONCLUSIVE = "inconclusive: noise floor"

DEFAULTS = {
    "constants": {"m": 2, "L": 1.0, "r": 1.0},
    "rmt-verify": {"samples": 200_000, "seed": 1},
    "limit-law": {"m": 2, "r": 1.0, "grid": 1024, "samples": 100_000, "seed": 1, "sweep": ""},
    "simulate": {"m": 2, "L": 20.0, "r": 1.0, "omega": None, "fields": 50, "grid_n": None, "seed": 1,
                 "kr_samples": 200_000},
}
COMMON = {"out": "critlab_out", "format": "csv,json"}
TYPES = {"m": int, "L": float, "r": float, "omega": float, "fields": int, "grid_n": int, "seed": int,
         "samples": int, "grid": int, "kr_samples": int, "sweep": str, "out": str, "format": str}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# configuration


def read_config(path) -> dict:
    """key = value lines; '#' starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce(key, value):
    if value is None or value == "":
        return None if key not in ("sweep",) else ""
    kind = TYPES.get(key, str)
    try:
        if kind is int:
            return int(float(value)) if float(value).is_integer() else int(value)
        return kind(value)
    except ValueError as e:
        raise UsageError(f"bad value for {key}: {value!r}") from e


def resolve_config(cmd: str, flags: dict, config: dict) -> dict:
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[cmd])
    for key, value in config.items():
        if key in cfg:
            cfg[key] = _coerce(key, value)
    for key, value in flags.items():
        if key in cfg and value is not None:
            cfg[key] = _coerce(key, value) if isinstance(value, str) else value
    cfg["seed"] = cfg.get("seed", 0)
    if cfg["seed"] is not None and not 0 <= int(cfg["seed"]) < 2**64:
        raise UsageError("seed must be a 64-bit unsigned integer")
    return cfg


# --------------------------------------------------------------------------
# output helpers


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(report) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


class Output:
    def __init__(self, cfg, name):
        self.dir = Path(cfg["out"])
        self.formats = {f.strip() for f in cfg["format"].split(",") if f.strip()}
        bad = self.formats - {"csv", "json", "svg"}
        if bad:
            raise UsageError(f"unknown output format(s): {sorted(bad)}")
        self.name = name
        self.files = []

    def write(self, kind, filename, text):
        if kind not in self.formats:
            return None
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / filename
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.files.append(str(path))
        return path


def _check(identity, params, lhs, rhs, tol, passed, status=None, **extra):
    row = {"identity": identity, "parameters": params, "lhs": lhs, "rhs": rhs, "tolerance": tol,
           "pass": None if status == INCONCLUSIVE else bool(passed), "status": status or ("pass" if passed else "fail")}
    row.update(extra)
    return row


def _mc_check(identity, params, value, mc, n_samples, k=3.0):
    diff = abs(value - mc.value)
    rel = mc.std_error / abs(mc.value) if mc.value else math.inf
    status = INCONCLUSIVE if (n_samples < MIN_MC_SAMPLES or rel > NOISE_REL) else None
    return _check(identity, params, value, mc.value, f"{k} std errors", diff <= k * mc.std_error, status,
                  std_error=mc.std_error, z=diff / mc.std_error if mc.std_error > 0 else None)


# --------------------------------------------------------------------------
# subcommands


def run_constants(cfg) -> dict:
    from .spectral_constants import (
        constant_identity_residuals, omega_params, r_lower_bound, spectral_constants, weyl_dimension_estimate,
    )

    m, L, r = cfg["m"], cfg["L"], cfg["r"]
    c = spectral_constants(m)
    res = constant_identity_residuals(m)
    om = omega_params(m, L, r)
    checks = [
        _check("s = h (m+2)(m+4)", {"m": m}, c.s, c.h * (m + 2) * (m + 4), 1e-12, res["s_vs_h"] <= 1e-12),
        _check("d = (m+4) h", {"m": m}, c.d, (m + 4) * c.h, 1e-12, res["d_vs_h"] <= 1e-12),
        _check("s_omega = s + omega_bar", {"m": m, "r": r}, om.s_omega, c.s + om.omega_bar, 1e-12,
               abs(om.s_omega - c.s - om.omega_bar) <= 1e-12 * om.s_omega),
    ]
    return {
        "m": m, "s": c.s, "d": c.d, "h": c.h,
        "log": {"s": c.log_s, "d": c.log_d, "h": c.log_h},
        "identity_residuals": res,
        "omega": {"L": L, "r": r, "omega_bar": om.omega_bar, "omega": om.omega, "s_omega": om.s_omega,
                  "r_lower_bound": r_lower_bound(m)},
        "weyl_dimension": weyl_dimension_estimate(m, L),
        "checks": checks,
    }


def run_rmt_verify(cfg) -> dict:
    from .random_matrices import (
        MatrixEnsemble, expected_abs_det_goe, expected_abs_det_mc, expected_abs_det_shifted,
        rescale_correlation, rho_exact, rho_mc_smooth, selberg_Z, selberg_Z_quadrature, semicircle_density,
    )

    n_samples, seed = cfg["samples"], cfg["seed"]
    checks = []
    for m, tol in ((1, 1e-8), (2, 1e-8), (3, 1e-4)):
        q, z = selberg_Z_quadrature(m), selberg_Z(m)
        checks.append(_check("Selberg constant Z_m", {"m": m}, z, q, tol, abs(z - q) <= tol * q))

    b1 = expected_abs_det_goe(1, 0.5, 0.0).value
    checks.append(_check("E|det| GOE_1^{1/2} = sqrt(2/pi)", {"m": 1, "v": 0.5, "c": 0.0}, float(b1),
                         math.sqrt(2 / math.pi), 1e-3, abs(b1 - math.sqrt(2 / math.pi)) <= 1e-3))
    cs = [0.0, 0.7, -1.3]
    key = 0
    for m in (1, 2, 3):
        for v in (0.5, 1.0):
            exact = expected_abs_det_goe(m, v, cs).value
            mc = expected_abs_det_mc(MatrixEnsemble.goe(m, v), cs, n_samples, seed=seed * 1000 + key)
            key += 1
            for j, c in enumerate(cs):
                checks.append(_mc_check("E|det(A-c)| over GOE_m^v vs rho_{m+1,v}", {"m": m, "v": v, "c": c},
                                        float(exact[j]), type(mc)(float(mc.value[j]), float(mc.std_error[j])), n_samples))

    for m in (1, 2, 3):
        for k in (0.25, 0.5):
            v, c = 1.0, 0.7
            g = expected_abs_det_shifted(m, 2 * k * v, v, c)
            s = expected_abs_det_shifted(m, 2 * k * v, v, c, form="completed_square")
            checks.append(_check("E|det| over S_m^{u,v}: general vs completed-square form",
                                 {"m": m, "k": k, "v": v, "c": c}, g.value, s.value, 1e-8,
                                 abs(g.value - s.value) <= 1e-8 * abs(s.value)))
            for c2 in (0.0, 0.7):
                val = expected_abs_det_shifted(m, 2 * k * v, v, c2).value
                mc = expected_abs_det_mc(MatrixEnsemble(m, 2 * k * v, v), c2, n_samples, seed * 1000 + key)
                key += 1
                checks.append(_mc_check("E|det(A-c)| over S_m^{2kv,v}", {"m": m, "k": k, "v": v, "c": c2}, val, mc,
                                        n_samples))

    x = np.linspace(-4, 4, 100)
    for n in (2, 3, 4):
        for cfac in (math.sqrt(2), 0.5):
            base = rho_exact(n, 1.0, Grid(-4, 4, 100))
            lhs = rescale_correlation(base, cfac)(x)
            rhs = cfac * base(cfac * x)
            err = float(np.max(np.abs(lhs - rhs)))
            checks.append(_check("c rho_{n,v}(c y) = rho_{n,v/c^2}(y)", {"n": n, "c": cfac}, err, 0.0, 1e-10,
                                 err <= 1e-10))

    r_check = float(semicircle_density(1.0, 0.0))
    checks.append(_check("semicircle density at 0", {"v": 1.0}, r_check, 1 / math.pi, 1e-15,
                         abs(r_check - 1 / math.pi) <= 1e-15))
    xs = np.linspace(-3, 3, 1201)
    sups = []
    sc_samples = max(n_samples // 20, 2)
    for n in (8, 16, 32, 64):
        rho = rho_mc_smooth(n, 1.0, Grid(-4 * math.sqrt(n), 4 * math.sqrt(n), 2049), sc_samples, seed=seed + n)
        scaled = rescale_correlation(rho, math.sqrt(n))
        sups.append(float(np.max(np.abs(scaled(xs) - semicircle_density(1.0, xs)))))
    decreasing = all(a > b for a, b in zip(sups, sups[1:]))
    status = INCONCLUSIVE if sc_samples < MIN_MC_SAMPLES else None
    checks.append(_check("semicircle convergence sqrt(n) rho_{n,1}(sqrt(n) x)", {"n": [8, 16, 32, 64]}, sups,
                         "decreasing", "strict decrease", decreasing, status))
    return {"checks": checks}


def _sweep_list(text):
    if not text:
        return []
    return [int(s) for s in str(text).replace(";", ",").split(",") if s.strip()]


def run_limit_law(cfg, out: Output) -> dict:
    from .limit_law import (
        case1_identity_check, correlation_source, gaussian_limit_report, limit_total_mass, sigma_m, sigma_mr,
        sigma_mr_via_mu,
    )

    m, r = cfg["m"], cfg["r"]
    if not r >= 1:
        raise UsageError(f"r={r}: the limit theorem assumes r >= 1")
    if m < 1:
        raise UsageError("m must be >= 1")
    grid = Grid(-8.0, 8.0, cfg["grid"])
    seed, n_samples = cfg["seed"], cfg["samples"]
    rho = correlation_source(m, n_samples, seed=seed)
    sig = sigma_mr(m, r, grid, rho)
    via = sigma_mr_via_mu(m, r, grid, rho)
    tol_audit = 1e-4 if rho.is_exact else 0.01
    ks_audit = ks_distance(sig, via)
    checks = [_check("sigma_{m,r} two constructions (KS)", {"m": m, "r": r, "rho": rho.method}, ks_audit, 0.0,
                     tol_audit, ks_audit <= tol_audit)]

    rng = np.random.default_rng(seed)
    rr = rng.uniform(1.0, 10.0, 10_000)
    rr[rr <= 1] = 1.5
    resid = float(np.max(np.abs(case1_identity_check(rr, rng.uniform(-5, 5, 10_000), rng.uniform(-5, 5, 10_000)))))
    checks.append(_check("completed-square identity, 1e4 random inputs", {"r": "(1,10]"}, resid, 0.0, 1e-12,
                         resid <= 1e-12))

    dec = sigma_m(m, grid, rho=rho)
    checks.append(_check("gamma_{2/(m+2)} * sigma_m = rhs (forward residual)", {"m": m}, dec.residual, 0.0, 1e-3,
                         dec.reliable))

    summary = {"m": m, "r": r, "rho_method": rho.method, "sigma_mass": sig.mass, "sigma_variance": sig.variance(),
               "sigma_m_residual": dec.residual, "sigma_m_clipped_mass": dec.clipped_mass}
    if r == 1:
        ref = gaussian_measure(2.0, grid)
        summary["ks_vs_gamma2"] = ks_distance(sig, ref)
        tm = limit_total_mass(m, rho=rho)
        summary["C_m"] = {"value": tm.value, "log": tm.log_value, "std_error": tm.std_error, "tail": tm.tail}

    sweep = _sweep_list(cfg["sweep"])
    if sweep:
        rows = gaussian_limit_report(sweep, grid, n_samples=n_samples, seed=seed)
        summary["sweep"] = [{"m": row.m, "ks": row.ks, "noise": row.noise} for row in rows]
        ks = [row.ks for row in rows]
        mono = all(a > b for a, b in zip(ks, ks[1:]))
        status = INCONCLUSIVE if n_samples < MIN_MC_SAMPLES else None
        checks.append(_check("KS(sigma_{m,1}, gamma_2) decreasing in m", {"ms": sweep}, ks, "decreasing",
                             "strict decrease", mono, status))

    out.write("csv", f"sigma_m{m}_r{r:g}.csv", sig.to_csv())
    if "svg" in out.formats:
        series = [(f"sigma_{m},{r:g}", sig.x, sig.density)]
        if r == 1:
            series.append(("gamma_2", grid.x, gaussian_measure(2.0, grid).density))
        out.write("svg", f"sigma_m{m}_r{r:g}.svg", svg.line_plot(series, title=f"sigma_(m={m}, r={r:g})", xlabel="lambda"))
    summary["checks"] = checks
    return summary


def run_simulate(cfg, out: Output) -> dict:
    from .limit_law import sigma_mr
    from .spectral_constants import omega_params
    from .torus_field_lab import build_spectrum, empirical_complexity, kac_rice_total

    m, L, r = cfg["m"], cfg["L"], cfg["r"]
    if m < 2:
        raise UsageError(f"m={m}: the simulations need dimension m > 1")
    if m > 3:
        raise UsageError(f"m={m}: torus simulations support m in {{2, 3}}")
    if not r >= 1:
        raise UsageError(f"r={r}: the limit theorem assumes r >= 1")
    params = omega_params(m, L, r)
    omega = params.omega if cfg["omega"] is None else float(cfg["omega"])
    if omega < 0:
        raise UsageError("omega must be nonnegative")
    spectrum = build_spectrum(m, L)
    seed = cfg["seed"]
    res = empirical_complexity(spectrum, omega, cfg["fields"], seed, cfg["grid_n"])
    kr, kr_se = kac_rice_total(spectrum, omega, cfg["kr_samples"], seed + 1)
    combined = math.hypot(kr_se, res.std_error)
    z = abs(res.mean_count - kr) / combined if combined > 0 else math.inf
    checks = [
        _check("empirical mean count vs Kac-Rice", {"m": m, "L": L, "omega": omega}, res.mean_count, kr,
               "3 combined std errors", z <= 3, None if cfg["fields"] >= 20 else INCONCLUSIVE, z=z),
        _check("sum of (-1)^index = 0 on every accepted field", {}, int(np.abs(res.euler_sums).max(initial=0)), 0, 0,
               bool(np.all(res.euler_sums == 0))),
    ]
    summary = {
        "m": m, "L": L, "r": r, "omega": omega, "dim": spectrum.dim, "n_fields": cfg["fields"], "n_used": res.n_used,
        "mean_count": res.mean_count, "mean_count_std_error": res.std_error,
        "kac_rice_total": kr, "kac_rice_std_error": kr_se, "rejection_rate": res.rejected_fraction,
        "count_over_dim": res.mean_count / spectrum.dim,
    }
    scale = math.sqrt(params.s_omega * L**m)
    limit = None
    if cfg["omega"] is None and res.n_used:
        emp = res.measure.rescale(1 / scale).normalize()
        limit = sigma_mr(m, r)
        # u and -u have the same law; pooling with negatives removes the per-field shift noise
        pooled = EmpiricalMeasure(np.concatenate([emp.atoms, -emp.atoms])).normalize()
        summary["ks_vs_sigma_mr"] = ks_distance(pooled, limit)
        summary["ks_vs_sigma_mr_unpooled"] = ks_distance(emp, limit)
    else:
        summary["ks_vs_sigma_mr"] = None
        summary["ks_vs_sigma_mr_unpooled"] = None

    lines = ["value,morse_index,field_id"] + [f"{v:.17g},{i},{fid}" for v, i, fid in res.rows]
    out.write("csv", "critical_values.csv", "\n".join(lines) + "\n")
    if "svg" in out.formats and res.n_used:
        curves = [(f"sigma_{m},{r:g}", limit.x, limit.density)] if limit is not None else []
        out.write("svg", "critical_values.svg", svg.histogram_overlay(
            res.measure.atoms / scale, 60, curves, title=f"rescaled critical values, L={L:g}", xlabel="value"))
    summary["checks"] = checks
    return summary


# --------------------------------------------------------------------------
# main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="critlab", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("--version", action="version", version=f"critlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value file; flags override it")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--format", help="comma list of csv,json,svg")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("constants", help="s_m, d_m, h_m and the omega parameters")
    common(sp)
    sp.add_argument("--m", type=int)
    sp.add_argument("--L", type=float)
    sp.add_argument("--r", type=float)

    sp = sub.add_parser("rmt-verify", help="random-matrix identity suite")
    common(sp)
    sp.add_argument("--samples", type=int)

    sp = sub.add_parser("limit-law", help="limit measures and their cross-checks")
    common(sp)
    sp.add_argument("--m", type=int)
    sp.add_argument("--r", type=float)
    sp.add_argument("--grid", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--sweep", help="comma list of m for the large-m sweep, e.g. 8,16,32,64")

    sp = sub.add_parser("simulate", help="torus fields: empirical vs Kac-Rice vs limit")
    common(sp)
    sp.add_argument("--m", type=int)
    sp.add_argument("--L", type=float)
    sp.add_argument("--r", type=float)
    sp.add_argument("--omega", type=float)
    sp.add_argument("--fields", type=int)
    sp.add_argument("--grid-n", dest="grid_n", type=int)
    sp.add_argument("--kr-samples", dest="kr_samples", type=int)
    return p


def _exit_code(report) -> int:
    return 0 if all(c["pass"] is not False for c in report.get("checks", [])) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    set_threads(args.threads)
    cmd = args.command
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "threads", "config")}
    try:
        config = read_config(args.config) if args.config else {}
        cfg = resolve_config(cmd, flags, config)
        out = Output(cfg, cmd)
        t0 = time.perf_counter()
        if cmd == "constants":
            body = run_constants(cfg)
        elif cmd == "rmt-verify":
            body = run_rmt_verify(cfg)
        elif cmd == "limit-law":
            body = run_limit_law(cfg, out)
        else:
            body = run_simulate(cfg, out)
        elapsed = time.perf_counter() - t0
    except UsageError as e:
        print(f"critlab {cmd}: {e}", file=sys.stderr)
        return 2
    except ValueError as e:  # includes ConstraintError
        print(f"critlab {cmd}: {e}", file=sys.stderr)
        return 2

    report = {"command": cmd, "version": __version__, "config": cfg, "seed": cfg.get("seed"), **body}
    report["all_pass"] = _exit_code(report) == 0
    text = dumps(report)
    name = cmd.replace("-", "_")
    out.write("json", f"{name}.json", text)
    out.write("json", f"{name}.timing.json", dumps({"command": cmd, "wall_clock_seconds": elapsed}))
    sys.stdout.write(text)
    print(f"critlab {cmd}: {elapsed:.2f} s", file=sys.stderr)
    return _exit_code(report)


if __name__ == "__main__":
    sys.exit(main())
