"""Universal limits of rescaled critical-value distributions.

sigma_{m,r} is proportional to gamma_{(r-1)/r} * (exp(-r x^2/4) rho_{m+1,1/r}(x) dx).
Everything here is built from a single rho_{m+1,1}: exact for m <= 3,
Monte Carlo otherwise, and rescaled to other variances exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .gaussian_core import (
    Deconvolution,
    Grid,
    Measure1D,
    convolve_gaussian,
    deconvolve_gaussian,
    gaussian_measure,
    ks_distance,
)
from .random_matrices import (
    EXACT_MAX_N,
    CorrelationFunction,
    Estimate,
    expected_abs_det_goe,
    expected_abs_det_shifted,
    rescale_correlation,
    rho_exact,
    rho_mc_smooth,
    semicircle_density,
)

DEFAULT_GRID = Grid(-8.0, 8.0, 1024)


def check_r(r: float) -> float:
    r = float(r)
    if not r >= 1:
        raise ValueError(f"the limit theorem assumes r >= 1, got r={r}")
    return r


def kappa(r: float) -> float:
    r = check_r(r)
    return (r - 1) / (2 * r)


def tau2(r: float) -> float:
    """tau^2 = kappa/(1 - kappa) = (r-1)/(r+1)."""
    k = kappa(r)
    return k / (1 - k)


@dataclass(frozen=True)
class LimitMeasureSpec:
    m: int
    r: float = 1.0
    grid: Grid = DEFAULT_GRID

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        check_r(self.r)

    @property
    def kappa(self) -> float:
        return kappa(self.r)

    @property
    def tau2(self) -> float:
        return tau2(self.r)


# --------------------------------------------------------------------------
# the correlation function all limits are built from


def mc_grid(n: int, step: float = 1 / 64) -> Grid:
    r = max(4 * math.sqrt(n), 12.0)
    k = int(round(2 * r / step))
    return Grid(-k * step / 2, k * step / 2, k + 1)


def correlation_source(m: int, n_samples: int = 100_000, seed: int = 0, exact: bool | None = None, threads=None) -> CorrelationFunction:
    """rho_{m+1,1}, exact when possible unless ``exact=False``."""
    n = m + 1
    if exact is None:
        exact = n <= EXACT_MAX_N
    if exact:
        return rho_exact(n, 1.0, Grid(-12.0, 12.0, 1537))
    return rho_mc_smooth(n, 1.0, mc_grid(n), n_samples=n_samples, seed=seed, threads=threads)


def _source(m, rho):
    if rho is None:
        if m + 1 > EXACT_MAX_N:
            raise ValueError(f"m={m}: pass a Monte Carlo rho_{{{m + 1},1}} (see correlation_source)")
        rho = correlation_source(m)
    if rho.n != m + 1 or not math.isclose(rho.v, 1.0):
        raise ValueError(f"need rho_{{{m + 1},1}}, got rho_{{{rho.n},{rho.v}}}")
    return rho


# --------------------------------------------------------------------------
# mu_m and sigma_{m,r}


def mu_m_density(m: int, r: float, y, rho: CorrelationFunction | None = None, with_error: bool = False):
    """E|det(A - y/sqrt(r))| over S_m^{2 kappa, 1}, times the standard normal density."""
    r = check_r(r)
    rho = _source(m, rho)
    y = np.asarray(y, dtype=float)
    phi = np.exp(-0.5 * y * y) / math.sqrt(2 * math.pi)
    c = y / math.sqrt(r)
    if r == 1:
        est = expected_abs_det_goe(m, 1.0, c, rho)
    else:
        est = expected_abs_det_shifted(m, 2 * kappa(r), 1.0, np.atleast_1d(c), rho)
        est = Estimate(np.reshape(est.value, y.shape), np.reshape(est.std_error, y.shape))
    value = est.value * phi
    if with_error:
        return Estimate(value, est.std_error * phi)
    return value


def _weighted_rho(m, r, rho, x):
    """exp(-r x^2/4) rho_{m+1,1/r}(x)."""
    scaled = rescale_correlation(rho, math.sqrt(r)) if r != 1 else rho
    return np.exp(-r * x * x / 4) * scaled.fast()(x)


def sigma_mr(m: int, r: float, grid: Grid = DEFAULT_GRID, rho: CorrelationFunction | None = None) -> Measure1D:
    """Normalized sigma_{m,r} on ``grid``; r = 1 skips the (degenerate) convolution."""
    r = check_r(r)
    rho = _source(m, rho)
    base = Measure1D.on_grid(grid, _weighted_rho(m, r, rho, grid.x))
    if r > 1:
        base = convolve_gaussian(base, (r - 1) / r, crop=True)
    out = base.normalize()
    out.meta.update({"m": m, "r": r, "rho": rho.method})
    return out


def sigma_mr_via_mu(m: int, r: float, grid: Grid = DEFAULT_GRID, rho: CorrelationFunction | None = None) -> Measure1D:
    """sigma_{m,r} assembled pointwise from the density of mu_m."""
    r = check_r(r)
    rho = _source(m, rho)
    out = Measure1D.on_grid(grid, np.clip(mu_m_density(m, r, grid.x, rho), 0, None)).normalize()
    out.meta.update({"m": m, "r": r, "rho": rho.method, "path": "mu"})
    return out


def case1_identity_check(r, lam, y, absolute: bool = False):
    """Residual of the completed-square identity behind the r > 1 limit (vectorised).

    Both sides contain terms of size ~1/(r-1) that cancel, so the default
    residual is divided by max(1, largest term); for O(1) terms this is the
    plain difference.  ``absolute=True`` returns the raw difference.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 1):
        raise ValueError("identity needs r > 1")
    lam = np.asarray(lam, dtype=float)
    y = np.asarray(y, dtype=float)
    t2 = (r - 1) / (r + 1)
    a = -((lam - (t2 + 1) * y / np.sqrt(r)) ** 2) / (4 * t2)
    b = -r * y * y / (2 * (r + 1))
    c = -lam * lam / 4
    d = -((np.sqrt(1 / (2 * (r - 1))) * lam - y * np.sqrt(r / (2 * (r - 1)))) ** 2)
    diff = (a + b) - (c + d)
    if absolute:
        return diff
    scale = np.maximum.reduce([np.ones_like(diff), np.abs(a), np.abs(b), np.abs(c), np.abs(d)])
    return diff / scale


# --------------------------------------------------------------------------
# the un-shifted limit sigma_m


def sigma_m_rhs(m: int, grid: Grid = DEFAULT_GRID, rho: CorrelationFunction | None = None) -> Measure1D:
    """(R_t)_* sigma_{m,1} with t = sqrt((m+4)/(m+2))."""
    rho = _source(m, rho)
    t = math.sqrt((m + 4) / (m + 2))
    x = grid.x / t
    dens = np.exp(-x * x / 4) * rho.fast()(x) / t
    out = Measure1D.on_grid(grid, dens).normalize()
    out.meta.update({"m": m, "scale": t})
    return out


def sigma_m(m: int, grid: Grid = DEFAULT_GRID, reg: float = 1e-8, rho: CorrelationFunction | None = None,
            threshold: float = 1e-3) -> Deconvolution:
    """Solve gamma_{2/(m+2)} * sigma_m = sigma_m_rhs(m) by regularized deconvolution."""
    rhs = sigma_m_rhs(m, grid, rho)
    return deconvolve_gaussian(rhs, 2.0 / (m + 2), reg=reg, threshold=threshold)


# --------------------------------------------------------------------------
# large-m checks


@dataclass
class LimitRow:
    m: int
    ks: float
    noise: float


def _sigma_m1_batches(m, grid, rho):
    """sigma_{m,1} CDFs for each MC batch (for a noise estimate)."""
    x = grid.x
    w = np.exp(-x * x / 4)
    cdfs = []
    for f in rho.batch_functions():
        meas = Measure1D.on_grid(grid, np.clip(w * f(x), 0, None)).normalize()
        cdfs.append(meas.cumulative())
    return np.array(cdfs)


def gaussian_limit_report(ms, grid: Grid = DEFAULT_GRID, n_samples: int = 100_000, seed: int = 0,
                          sources: dict | None = None, threads=None) -> list[LimitRow]:
    """KS(sigma_{m,1}, gamma_2) along ``ms`` with Monte Carlo rho_{m+1,1}."""
    ms = list(ms)
    if not ms:
        raise ValueError("need at least one m")
    ref = gaussian_measure(2.0, grid)
    rows = []
    for m in ms:
        rho = (sources or {}).get(m) or correlation_source(m, n_samples, seed=seed + m, exact=False, threads=threads)
        sig = sigma_mr(m, 1.0, grid, rho)
        ks = ks_distance(sig, ref)
        cdfs = _sigma_m1_batches(m, grid, rho)
        noise = float(np.max(cdfs.std(axis=0, ddof=1)) / math.sqrt(len(cdfs))) if len(cdfs) > 1 else 0.0
        rows.append(LimitRow(m, float(ks), noise))
    return rows


def rbar_comparison(m: int, c: float = 1.5, rho: CorrelationFunction | None = None, n_samples: int = 100_000,
                    seed: int = 0, x_max: float = 3.0, step: float = 0.005) -> tuple[float, float]:
    """sup_{|x|<=c} and sup_{c<=|x|<=x_max} of |Rbar_m - R_inf|, Rbar_m = rho_{m+1,1/m}."""
    if not 0 < c < 2:
        raise ValueError("c must lie in (0, 2)")
    if rho is None:
        rho = correlation_source(m, n_samples, seed=seed + m)
    rbar = rescale_correlation(rho, math.sqrt(m))
    x = np.arange(-x_max, x_max + step / 2, step)
    dev = np.abs(rbar.fast()(x) - semicircle_density(1.0, x))
    inside = np.abs(x) <= c
    return float(dev[inside].max()), float(dev[~inside].max())


@dataclass
class TotalMass:
    m: int
    value: float
    log_value: float
    std_error: float
    tail: float
    info: dict = field(default_factory=dict)


def limit_total_mass(m: int, rho: CorrelationFunction | None = None, n_samples: int = 100_000, seed: int = 0,
                     y_max: float = 16.0, step: float = 1 / 256, threads=None) -> TotalMass:
    """(2/(m+4))^{m/2} Gamma(1+m/2) mu_m(R) at r = 1.

    This is the limit of N^L / (s_m L^m), i.e. the constant C_m.  ``tail``
    is the integrand at |y| = y_max relative to its peak (truncation check).
    """
    if rho is None:
        rho = correlation_source(m, n_samples, seed=seed + m, threads=threads)
    rho = _source(m, rho)
    y = np.arange(-y_max, y_max + step / 2, step)
    w = np.exp(-y * y / 4)

    def integral(f):
        return float(np.trapezoid(w * f(y), y))

    est = rho.functional(integral)
    log_pre = 0.5 * (m + 4) * math.log(2) + gammaln(0.5 * (m + 3)) - 0.5 * math.log(2 * math.pi)
    log_scale = 0.5 * m * math.log(2 / (m + 4)) + gammaln(1 + 0.5 * m)
    log_val = log_scale + log_pre + math.log(est.value)
    integrand = w * rho.fast()(y)
    tail = float(max(integrand[0], integrand[-1]) / integrand.max())
    value = math.exp(log_val)
    return TotalMass(m, value, log_val, value * float(est.std_error) / est.value, tail,
                     {"I_m": est.value, "rho": rho.method})


def growth_slope(ms, log_values, loglog: bool = True) -> float:
    """Fitted growth exponent of log C_m against (1/2) m log m.

    With ``loglog`` this is the slope of log(log C_m) on log((1/2) m log m),
    which tends to 1 when log C_m ~ (1/2) m log m; otherwise the plain
    least-squares slope of log C_m on (1/2) m log m.
    """
    ms = np.asarray(ms, dtype=float)
    y = np.asarray(log_values, dtype=float)
    x = 0.5 * ms * np.log(ms)
    if loglog:
        if np.any(y <= 0):
            raise ValueError("log-log fit needs C_m > 1 for every m")
        x, y = np.log(x), np.log(y)
    return float(np.polyfit(x, y, 1)[0])
