"""Gaussian ensembles S_m^{u,v} of real symmetric matrices.

S_m^{u,v} has entry covariances
    E(a_ij a_kl) = u d_ij d_kl + v (d_ik d_jl + d_il d_jk)
and GOE_m^v is the case u = 0.  The 1-point correlation function rho_{n,v}
of GOE_n^v is available exactly for n <= 4 (quadrature of the Weyl
integrand) and by Monte Carlo for any n.
"""
from __future__ import annotations

import math
import warnings
from functools import lru_cache
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import gammaln, ndtr

from ._streams import chunk_sizes, ordered_map, rng_for
from .gaussian_core import GaussianVector, Grid, Measure1D, gaussian_density, sample as sample_gaussian

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
EXACT_MAX_N = 4


class Estimate(NamedTuple):
    value: float | np.ndarray
    std_error: float | np.ndarray


# --------------------------------------------------------------------------
# ensembles and sampling


@dataclass(frozen=True)
class MatrixEnsemble:
    m: int
    u: float
    v: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"matrix size must be a positive integer, got {self.m}")
        if not self.v > 0:
            raise ValueError(f"need v > 0, got v={self.v}")
        if not self.m * self.u + 2 * self.v > 0:
            raise ValueError(f"need m*u + 2v > 0, got m={self.m}, u={self.u}, v={self.v}")

    @classmethod
    def goe(cls, m: int, v: float) -> "MatrixEnsemble":
        return cls(m, 0.0, v)

    def entry_covariance(self) -> tuple[np.ndarray, np.ndarray]:
        """Covariance of the upper-triangular entries a_ij (i <= j), row-major order."""
        iu = np.triu_indices(self.m)
        i, j = iu
        ii, kk = np.meshgrid(i, i, indexing="ij")
        jj, ll = np.meshgrid(j, j, indexing="ij")
        same = ((ii == kk) & (jj == ll)).astype(float) + ((ii == ll) & (jj == kk))
        cov = self.u * ((ii == jj) & (kk == ll)) + self.v * same
        return np.stack(iu, axis=1), cov.astype(float)


def _goe_batch(rng, count, m, v):
    g = rng.standard_normal((count, m, m)) * math.sqrt(v)
    return (g + np.swapaxes(g, 1, 2)) / math.sqrt(2.0)


def _ensemble_batch(ens: MatrixEnsemble, rng, count: int, seed_keys=()):
    m, u, v = ens.m, ens.u, ens.v
    a = _goe_batch(rng, count, m, v)
    if u > 0:
        a += rng.standard_normal(count)[:, None, None] * math.sqrt(u) * np.eye(m)
    elif u < 0:
        # B + X 1 needs u > 0; draw the diagonal block with covariance 2v I + u J instead
        diag_cov = 2 * v * np.eye(m) + u * np.ones((m, m))
        d = sample_gaussian(GaussianVector(np.zeros(m), diag_cov), int(rng.integers(2**63)), count, threads=1)
        idx = np.arange(m)
        a[:, idx, idx] = d
    return a


def sample_matrices(ens: MatrixEnsemble, count: int, seed: int, chunk: int = 20_000, threads=None) -> np.ndarray:
    """``count`` independent draws from ``ens``, shape (count, m, m)."""
    sizes = chunk_sizes(count, chunk)
    parts = ordered_map(lambda job: _ensemble_batch(ens, rng_for(seed, job[0]), job[1]), list(enumerate(sizes)), threads)
    return np.concatenate(parts, axis=0)


def sample_matrix(ens: MatrixEnsemble, seed: int) -> np.ndarray:
    return sample_matrices(ens, 1, seed)[0]


def _eigen_batches(ens: MatrixEnsemble, n_samples: int, seed: int, chunk: int, threads=None):
    """Yield (batch_index, eigenvalues) for fixed-size chunks of draws."""
    sizes = chunk_sizes(n_samples, chunk)

    def work(job):
        i, size = job
        return np.linalg.eigvalsh(_ensemble_batch(ens, rng_for(seed, i), size))

    # evaluate lazily in groups so memory stays bounded
    group = max(1, (threads or 1) * 2)
    for start in range(0, len(sizes), group):
        jobs = [(i, sizes[i]) for i in range(start, min(start + group, len(sizes)))]
        for (i, _), eig in zip(jobs, ordered_map(work, jobs, threads)):
            yield i, eig


# --------------------------------------------------------------------------
# densities of the ensembles


def log_selberg_Z(m: int, v: float | None = None) -> float:
    """log Z_m (or log Z_m(v) when v is given)."""
    if int(m) != m or not 1 <= m <= 200:
        raise ValueError(f"need 1 <= m <= 200, got {m}")
    m = int(m)
    j = np.arange(1, m + 1)
    out = 0.5 * m * math.log(2.0) + gammaln(m + 1) + gammaln(0.5 * j).sum()
    if v is not None:
        if not v > 0:
            raise ValueError("v must be positive")
        out += 0.25 * m * (m + 1) * math.log(2.0 * v)
    return float(out)


def selberg_Z(m: int, v: float | None = None) -> float:
    """Z_m = 2^{m/2} m! prod_j Gamma(j/2); Z_m(v) = (2v)^{m(m+1)/4} Z_m."""
    return math.exp(log_selberg_Z(m, v))


def selberg_Z_quadrature(m: int) -> float:
    """Z_m by adaptive quadrature of the Weyl integrand (m <= 3), as an oracle."""
    from scipy import integrate

    w = lambda *lam: math.exp(-0.5 * sum(x * x for x in lam))  # noqa: E731
    if m == 1:
        val, err = integrate.quad(lambda x: w(x), -np.inf, np.inf, epsabs=0, epsrel=1e-12)
        return val
    if m == 2:
        # ordered region x < y, times 2!
        val, _ = integrate.dblquad(lambda y, x: (y - x) * w(x, y), -np.inf, np.inf, lambda x: x, lambda x: np.inf,
                                   epsabs=0, epsrel=1e-11)
        return 2 * val
    if m == 3:
        f = lambda z, y, x: (y - x) * (z - x) * (z - y) * w(x, y, z)  # noqa: E731
        val, _ = integrate.tplquad(f, -9, 9, lambda x: x, lambda x: 9, lambda x, y: y, lambda x, y: 9,
                                   epsabs=1e-9, epsrel=1e-7)
        return 6 * val
    raise ValueError(m)


def ensemble_log_density(a: np.ndarray, u: float, v: float) -> np.ndarray:
    """log dGamma_{u,v}/|dA| where |dA| = prod_{i<=j} d(hat a_ij)."""
    a = np.asarray(a, dtype=float)
    m = a.shape[-1]
    log_d = ((m - 1) + m * (m - 1) / 2) * math.log(2 * v) + math.log(m * u + 2 * v)
    u_prime = -u / (2 * v * (m * u + 2 * v))
    tr = np.trace(a, axis1=-2, axis2=-1)
    tr2 = np.einsum("...ij,...ji->...", a, a)
    return -0.25 * m * (m + 1) * math.log(2 * math.pi) - 0.5 * log_d - tr2 / (4 * v) - 0.5 * u_prime * tr**2


def goe_log_density(a: np.ndarray, v: float) -> np.ndarray:
    """log density of GOE_m^v w.r.t. |dA|: -(m(m+1)/4) log(4 pi v) - tr A^2 / (4v)."""
    a = np.asarray(a, dtype=float)
    m = a.shape[-1]
    tr2 = np.einsum("...ij,...ji->...", a, a)
    return -0.25 * m * (m + 1) * math.log(4 * math.pi * v) - tr2 / (4 * v)


def semicircle_density(v: float, x):
    """(2 pi v)^{-1} sqrt(4v - x^2) on |x| <= 2 sqrt(v)."""
    if not v > 0:
        raise ValueError("v must be positive")
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.clip(4 * v - x * x, 0.0, None)) / (2 * math.pi * v)


# --------------------------------------------------------------------------
# exact 1-point correlation, n <= 4


def _tail_moments(a, s, kmax):
    """T_j(a) = int_a^inf t^j exp(-t^2/(2 s^2)) dt for j = 0..kmax."""
    e = np.exp(-a * a / (2 * s * s))
    out = [s * math.sqrt(2 * math.pi) * ndtr(-a / s)]
    if kmax >= 1:
        out.append(s * s * e)
    for j in range(2, kmax + 1):
        out.append(s * s * (a ** (j - 1) * e + (j - 1) * out[j - 2]))
    return out


def _full_moment(j, s):
    if j % 2:
        return 0.0
    dfact = 1.0
    for k in range(j - 1, 0, -2):
        dfact *= k
    return s ** (j + 1) * math.sqrt(2 * math.pi) * dfact


def abs_poly_gauss(roots, s):
    """int prod_j |t - roots_j| exp(-t^2/(2 s^2)) dt, vectorised over leading axes."""
    b = np.sort(np.asarray(roots, dtype=float), axis=-1)
    k = b.shape[-1]
    coef = [np.ones(b.shape[:-1])]
    for j in range(k):
        r = b[..., j]
        new = [-r * coef[0]]
        for i in range(1, len(coef)):
            new.append(coef[i - 1] - r * coef[i])
        new.append(coef[-1])
        coef = new
    tails = [_tail_moments(b[..., i], s, k) for i in range(k)]
    total = np.zeros(b.shape[:-1])
    for j in range(k + 1):
        acc = (-1) ** k * _full_moment(j, s)
        for i in range(k):
            acc = acc + 2 * (-1) ** (k - 1 - i) * tails[i][j]
        total = total + coef[j] * acc
    return total


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(q):
    if q not in _GL_CACHE:
        _GL_CACHE[q] = leggauss(q)
    return _GL_CACHE[q]


def _panel_nodes(a, b, panels, q):
    """Composite Gauss-Legendre nodes/weights on [a, b] (a, b arrays, broadcast)."""
    t, w = _gl(q)
    edges = a[..., None] + (b - a)[..., None] * np.linspace(0.0, 1.0, panels + 1)
    left, right = edges[..., :-1], edges[..., 1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    nodes = mid[..., None] + half[..., None] * t
    weights = half[..., None] * w
    shape = nodes.shape[:-2] + (panels * q,)
    return nodes.reshape(shape), weights.reshape(shape)


def _split_nodes(breaks, panels, q):
    """Nodes covering consecutive intervals between sorted breakpoints (last axis)."""
    nodes, weights = [], []
    for i in range(breaks.shape[-1] - 1):
        x, w = _panel_nodes(breaks[..., i], breaks[..., i + 1], panels, q)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes, axis=-1), np.concatenate(weights, axis=-1)


def _rho_exact_chunk(n, s, x, panels, q):
    reach = 10.0 * s
    half = np.abs(x) + reach
    if n == 1:
        return np.exp(-x * x / (2 * s * s))
    if n == 2:
        return np.exp(-x * x / (2 * s * s)) * abs_poly_gauss(x[:, None], s)
    if n == 3:
        br = np.stack([-half, x, half], axis=-1)
        l2, w2 = _split_nodes(br, panels, q)
        xx = np.broadcast_to(x[:, None], l2.shape)
        inner = abs_poly_gauss(np.stack([xx, l2], axis=-1), s)
        f = np.abs(xx - l2) * np.exp(-l2 * l2 / (2 * s * s)) * inner
        return np.exp(-x * x / (2 * s * s)) * np.sum(w2 * f, axis=-1)
    # n == 4
    br = np.stack([-half, x, half], axis=-1)
    l2, w2 = _split_nodes(br, panels, q)
    xx = np.broadcast_to(x[:, None], l2.shape)
    hh = np.broadcast_to(half[:, None], l2.shape)
    lo, hi = np.minimum(xx, l2), np.maximum(xx, l2)
    br3 = np.stack([-hh, lo, hi, hh], axis=-1)
    l3, w3 = _split_nodes(br3, panels, q)
    x3 = xx[..., None]
    a2 = l2[..., None]
    shape = l3.shape
    inner = abs_poly_gauss(
        np.stack([np.broadcast_to(x3, shape), np.broadcast_to(a2, shape), l3], axis=-1), s
    )
    f3 = np.abs(x3 - l3) * np.abs(a2 - l3) * np.exp(-l3 * l3 / (2 * s * s)) * inner
    g2 = np.sum(w3 * f3, axis=-1)
    f2 = np.abs(xx - l2) * np.exp(-l2 * l2 / (2 * s * s)) * g2
    return np.exp(-x * x / (2 * s * s)) * np.sum(w2 * f2, axis=-1)


def rho_exact_values(n: int, v: float, x, panels: int = 3, q: int = 20):
    """Exact rho_{n,v}(x) for n <= 4.

    Integrates Q_{n,v}(x, l_2, ..., l_n) over l_2..l_n: the last variable in
    closed form, the others by Gauss-Legendre panels split at every kink of
    the Vandermonde factor.
    """
    if int(n) != n or not 1 <= n <= EXACT_MAX_N:
        raise ValueError(f"exact correlation function needs 1 <= n <= {EXACT_MAX_N}; use rho_mc for n={n}")
    if not v > 0:
        raise ValueError("v must be positive")
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    s = math.sqrt(2.0 * v)
    chunk = {1: 1 << 20, 2: 1 << 18, 3: 4096, 4: 48}[n]
    out = np.empty_like(flat)
    for start in range(0, flat.size, chunk):
        sl = slice(start, start + chunk)
        out[sl] = _rho_exact_chunk(n, s, flat[sl], panels, q)
    return (out * math.exp(-log_selberg_Z(n, v))).reshape(x.shape)


class _ExactTable:
    """Cubic spline of log rho_{n,v} on [-R, R]; exact evaluation outside."""

    def __init__(self, n, v, step):
        self.n, self.v = n, v
        self.R = 2 * math.sqrt(n * v) + 16 * math.sqrt(v)
        x = np.arange(0.0, self.R + step, step)
        y = np.log(rho_exact_values(n, v, x))
        # even function: mirror so the spline sees zero slope at 0
        self.spline = CubicSpline(np.concatenate([-x[:0:-1], x]), np.concatenate([y[:0:-1], y]))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.exp(self.spline(np.clip(t, -self.R, self.R)))
        far = np.abs(t) > self.R
        if np.any(far):
            out[far] = rho_exact_values(self.n, self.v, t[far])
        return out


@lru_cache(maxsize=16)
def rho_exact_table(n: int, v: float, step: float = 0.01) -> Callable:
    """Fast interpolant for rho_{n,v} (relative error ~1e-10), built once per (n, v)."""
    if n <= 2:
        return lambda t: rho_exact_values(n, v, t)
    return _ExactTable(n, v, step)


# --------------------------------------------------------------------------
# correlation functions as objects


@dataclass
class CorrelationFunction:
    """rho_{n,v} sampled on a grid.

    ``method`` is "exact" (pointwise evaluation is exact everywhere) or one
    of the Monte Carlo estimators; MC objects carry independent batch
    estimates used for standard errors.
    """

    n: int
    v: float
    method: str
    measure: Measure1D
    batches: np.ndarray | None = None
    n_samples: int | None = None
    info: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.measure.x

    @property
    def density(self) -> np.ndarray:
        return self.measure.density

    @property
    def is_exact(self) -> bool:
        return self.method == "exact"

    @property
    def std_error(self) -> np.ndarray:
        if self.batches is None:
            return np.zeros(self.measure.n_grid)
        b = self.batches.shape[0]
        return self.batches.std(axis=0, ddof=1) / math.sqrt(b)

    def __call__(self, t):
        if self.is_exact:
            return rho_exact_values(self.n, self.v, t)
        return self.measure(t)

    def fast(self) -> Callable:
        """Callable for bulk evaluation (tabulated when exact)."""
        if self.is_exact:
            return rho_exact_table(self.n, float(self.v))
        return self.measure

    def std_error_at(self, t):
        return np.interp(t, self.x, self.std_error, left=0.0, right=0.0)

    def batch_functions(self) -> list[Callable]:
        if self.batches is None:
            return []
        x = self.x
        return [lambda t, row=row: np.interp(t, x, row, left=0.0, right=0.0) for row in self.batches]

    def functional(self, fn: Callable[[Callable], float]) -> Estimate:
        """Apply a linear functional; MC error from the spread over batches."""
        value = fn(self.fast())
        funcs = self.batch_functions()
        if not funcs:
            return Estimate(value, 0.0 * np.asarray(value))
        vals = np.array([fn(f) for f in funcs])
        return Estimate(value, vals.std(axis=0, ddof=1) / math.sqrt(len(funcs)))


def default_mc_grid(n: int, v: float, bins: int = 200) -> Grid:
    """Bin centres of ``bins`` equal bins over [-4 sqrt(nv), 4 sqrt(nv)]."""
    r = 4.0 * math.sqrt(n * v)
    w = 2 * r / bins
    return Grid(-r + 0.5 * w, r - 0.5 * w, bins)


def rho_exact(n: int, v: float, grid: Grid | None = None) -> CorrelationFunction:
    if grid is None:
        r = 4.0 * math.sqrt(n * v) + 4.0 * math.sqrt(v)
        grid = Grid(-r, r, 401)
    values = rho_exact_values(n, v, grid.x)
    return CorrelationFunction(n, float(v), "exact", Measure1D.on_grid(grid, values))


def _bin_edges(grid: Grid) -> np.ndarray:
    dx = grid.dx
    return np.concatenate([grid.x - 0.5 * dx, [grid.hi + 0.5 * dx]])


def rho_mc(
    n: int,
    v: float,
    grid: Grid | None = None,
    n_samples: int = 100_000,
    seed: int = 0,
    batches: int = 50,
    threads=None,
) -> CorrelationFunction:
    """Histogram of all eigenvalues of ``n_samples`` draws from GOE_n^v.

    Bins are centred on the grid points.  The density is normalised by the
    number of eigenvalues inside the bins, so the histogram has mass exactly
    1; the fraction that fell outside is kept in ``info``.
    """
    if grid is None:
        grid = default_mc_grid(n, v)
    if n_samples < batches * 2:
        batches = max(2, n_samples // 2)
    edges = _bin_edges(grid)
    width = grid.dx
    per_batch = int(math.ceil(n_samples / batches))
    ens = MatrixEnsemble.goe(n, v)
    batches = len(chunk_sizes(n_samples, per_batch))
    rows = np.zeros((batches, grid.n))
    outside = 0
    for i, eig in _eigen_batches(ens, n_samples, seed, per_batch, threads):
        counts, _ = np.histogram(eig.ravel(), bins=edges)
        rows[i] = counts
        outside += eig.size - counts.sum()
    # normalise by the eigenvalues that landed on the grid: sum(density) * width == 1
    dens_batches = rows / (np.maximum(rows.sum(axis=1, keepdims=True), 1) * width)
    density = rows.sum(axis=0) / (rows.sum() * width)
    expected = rows.sum(axis=0)
    sparse = np.mean(expected[density > 0] < 25) if np.any(density > 0) else 1.0
    if sparse > 0.5:
        warnings.warn(
            f"rho_mc: most occupied bins hold < 25 eigenvalues; relative error per bin ~ {1 / math.sqrt(max(expected.max(), 1)):.2g} at best",
            RuntimeWarning,
            stacklevel=2,
        )
    return CorrelationFunction(
        n, float(v), "mc-histogram", Measure1D.on_grid(grid, density), dens_batches, n_samples,
        {"outside_fraction": outside / (n * n_samples), "seed": seed},
    )


def rho_mc_smooth(
    n: int,
    v: float,
    grid: Grid | None = None,
    n_samples: int = 100_000,
    seed: int = 0,
    batches: int = 50,
    shrink: float = 0.95,
    threads=None,
) -> CorrelationFunction:
    """Smooth unbiased Monte Carlo estimate of rho_{n,v}.

    GOE_n^v = S_n^{-eps,v} + N(0, eps) 1 with independent summands whenever
    n*eps < 2v, so rho_{n,v} is exactly gamma_eps convolved with the
    eigenvalue density of S_n^{-eps,v}.  We sample the latter and integrate
    the Gaussian shift analytically (eps = shrink * 2v/n).  Eigenvalues are
    also reflected, since both ensembles are invariant under A -> -A.
    """
    if grid is None:
        grid = default_mc_grid(n, v)
    if not 0 < shrink < 1:
        raise ValueError("shrink must lie in (0, 1)")
    eps = shrink * 2.0 * v / n
    sd = math.sqrt(eps)
    step = min(grid.dx, sd / 16.0)
    pad = 10.0 * sd
    lo, hi = grid.lo - pad, grid.hi + pad
    nfine = int(math.ceil((hi - lo) / step)) + 1
    fine = lo + step * np.arange(nfine)
    # linear binning widens each atom by variance step^2/6; take it out of the kernel
    k_var = eps - step * step / 6.0
    kpts = int(math.ceil(10.0 * math.sqrt(k_var) / step))
    kernel = gaussian_density(0.0, k_var, step * np.arange(-kpts, kpts + 1))

    if n_samples < batches * 2:
        batches = max(2, n_samples // 2)
    per_batch = int(math.ceil(n_samples / batches))
    ens = MatrixEnsemble(n, -eps, v)
    batches = len(chunk_sizes(n_samples, per_batch))
    rows = np.zeros((batches, grid.n))
    sizes = np.zeros(batches)
    for i, eig in _eigen_batches(ens, n_samples, seed, per_batch, threads):
        pts = np.concatenate([eig.ravel(), -eig.ravel()])
        pos = (pts - lo) / step
        j = np.floor(pos).astype(np.int64)
        frac = pos - j
        ok = (j >= 0) & (j < nfine - 1)
        dep = np.bincount(j[ok], weights=1 - frac[ok], minlength=nfine)
        dep += np.bincount(j[ok] + 1, weights=frac[ok], minlength=nfine)
        smooth = np.convolve(dep, kernel, mode="same")
        rows[i] = np.interp(grid.x, fine, smooth)
        sizes[i] = eig.shape[0]
    dens_batches = rows / (2 * n * sizes[:, None])
    density = rows.sum(axis=0) / (2 * n * n_samples)
    return CorrelationFunction(
        n, float(v), "mc-smooth", Measure1D.on_grid(grid, np.clip(density, 0, None)), dens_batches, n_samples,
        {"eps": eps, "seed": seed},
    )


def rescale_correlation(rho: CorrelationFunction, c: float) -> CorrelationFunction:
    """y -> c rho_{n,v}(c y), which is rho_{n, v/c^2}."""
    if not c > 0:
        raise ValueError("c must be positive")
    m = rho.measure
    measure = Measure1D(m.lo / c, m.hi / c, m.density * c, dict(m.meta))
    batches = None if rho.batches is None else rho.batches * c
    return replace(rho, v=rho.v / (c * c), measure=measure, batches=batches, info=dict(rho.info))


# --------------------------------------------------------------------------
# expected absolute determinants


def _log_det_prefactor(m: int, v: float) -> float:
    return 1.5 * math.log(2.0) + 0.5 * (m + 1) * math.log(2.0 * v) + gammaln(0.5 * (m + 3))


def _resolve_rho(n, v, rho):
    if rho is None:
        if n > EXACT_MAX_N:
            raise ValueError(f"rho_{{{n},v}} is not available exactly; pass a Monte Carlo CorrelationFunction")
        return CorrelationFunction(n, float(v), "exact", Measure1D(-1.0, 1.0, np.zeros(2)))
    if rho.n != n or not math.isclose(rho.v, v, rel_tol=1e-12):
        raise ValueError(f"need rho_{{{n},{v}}}, got rho_{{{rho.n},{rho.v}}}")
    return rho


def expected_abs_det_goe(m: int, v: float, c, rho: CorrelationFunction | None = None) -> Estimate:
    """E|det(A - c 1)| over GOE_m^v via the (m+1)-point correlation function.

    2^{3/2} (2v)^{(m+1)/2} Gamma((m+3)/2) exp(c^2/(4v)) rho_{m+1,v}(c)
    """
    if not v > 0:
        raise ValueError("v must be positive")
    r = _resolve_rho(m + 1, v, rho)
    c = np.asarray(c, dtype=float)
    factor = np.exp(_log_det_prefactor(m, v) + c * c / (4 * v))
    return r.functional(lambda f: factor * f(c))


def _det_shift_nodes(center, half, panels=24, q=24):
    a = np.atleast_1d(center - half)
    b = np.atleast_1d(center + half)
    return _panel_nodes(a, b, panels, q)


def expected_abs_det_shifted(
    m: int, u: float, v: float, c, rho: CorrelationFunction | None = None, form: str = "general"
) -> Estimate:
    """E|det(A - c 1)| over S_m^{u,v}, u > 0, as an integral of rho_{m+1,v}.

    ``form="general"`` integrates
        rho(c - x) exp((c - x)^2/(4v) - x^2/(2u)) dx / sqrt(2 pi u)
    ``form="completed_square"`` (u = 2kv with k < 1) integrates over
    lambda = c - x with the Gaussian factor
        exp(-(lambda - (t^2+1) c)^2 / (4 v t^2) + (t^2+1) c^2 / (4v)),  t^2 = k/(1-k).
    The two use different node sets, so their agreement is a real check.
    """
    if not u > 0 or not v > 0:
        raise ValueError("need u > 0 and v > 0")
    r = _resolve_rho(m + 1, v, rho)
    c_arr = np.atleast_1d(np.asarray(c, dtype=float))
    k = u / (2 * v)
    logpre = _log_det_prefactor(m, v)

    if form == "general":
        bulk = math.sqrt(2 * (m + 1) * v) * 2
        if k < 1:
            width = math.sqrt(u / (1 - k))
            center = -k / (1 - k) * c_arr
            half = 14.0 * width + 0.0 * c_arr
        else:
            center = 0.0 * c_arr
            half = np.abs(c_arr) + bulk + 14.0 * math.sqrt(u) + 14.0 * math.sqrt(2 * v)
        x, w = _det_shift_nodes(center, half)
        lam = c_arr[:, None] - x

        def fn(f):
            log_g = lam * lam / (4 * v) - x * x / (2 * u)
            val = np.sum(w * f(lam) * np.exp(log_g + logpre), axis=-1) / math.sqrt(2 * math.pi * u)
            return val
    elif form == "completed_square":
        if k >= 1:
            raise ValueError(f"completed-square form needs u < 2v (k = {k:.4g} >= 1)")
        t2 = k / (1 - k)
        center = (t2 + 1) * c_arr
        half = 14.0 * math.sqrt(2 * v * t2) + 0.0 * c_arr
        lam, w = _det_shift_nodes(center, half)
        pre = 1.5 * math.log(2.0) + 0.5 * m * math.log(2 * v) + gammaln(0.5 * (m + 3)) - 0.5 * math.log(2 * math.pi * k)

        def fn(f):
            log_g = -((lam - center[:, None]) ** 2) / (4 * v * t2) + (t2 + 1) * c_arr[:, None] ** 2 / (4 * v)
            return np.sum(w * f(lam) * np.exp(log_g + pre), axis=-1)
    else:
        raise ValueError(f"unknown form {form!r}")

    est = r.functional(fn)
    if np.ndim(c) == 0:
        return Estimate(float(est.value[0]), float(np.asarray(est.std_error).ravel()[0]))
    return est


def expected_abs_det_mc(ens: MatrixEnsemble, c, n_samples: int, seed: int, chunk: int = 50_000, threads=None) -> Estimate:
    """Sample mean and standard error of |det(A - c 1)| (common draws for all c)."""
    c_arr = np.atleast_1d(np.asarray(c, dtype=float))
    total = np.zeros(c_arr.size)
    total_sq = np.zeros(c_arr.size)
    for _, eig in _eigen_batches(ens, n_samples, seed, chunk, threads):
        d = np.prod(np.abs(eig[:, None, :] - c_arr[None, :, None]), axis=-1)
        total += d.sum(axis=0)
        total_sq += (d * d).sum(axis=0)
    mean = total / n_samples
    var = np.maximum(total_sq / n_samples - mean * mean, 0.0) * n_samples / max(n_samples - 1, 1)
    se = np.sqrt(var / n_samples)
    if np.ndim(c) == 0:
        return Estimate(float(mean[0]), float(se[0]))
    return Estimate(mean, se)
