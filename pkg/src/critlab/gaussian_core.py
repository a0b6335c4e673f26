"""Finite-dimensional Gaussian vectors and a small toolkit for measures on R.

Measures are stored as densities sampled on a uniform grid.  The Gaussian
gamma_0 is the Dirac mass at 0, so convolving with variance 0 is the
identity and never goes through the grid.
"""
from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import signal

from ._streams import chunk_sizes, ordered_map, rng_for

SYM_TOL = 1e-12
PSD_TOL = 1e-10
MAX_CONDITION = 1e12


class SingularCovarianceError(np.linalg.LinAlgError):
    def __init__(self, message, condition_number=math.inf):
        super().__init__(message)
        self.condition_number = condition_number


class NotPSDError(np.linalg.LinAlgError):
    pass


# --------------------------------------------------------------------------
# Gaussian vectors


@dataclass
class GaussianVector:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        n = self.mean.shape[0]
        if self.mean.ndim != 1 or self.cov.shape != (n, n):
            raise ValueError(f"shape mismatch: mean {self.mean.shape}, cov {self.cov.shape}")
        scale = max(np.abs(self.cov).max(initial=0.0), 1.0)
        if np.abs(self.cov - self.cov.T).max(initial=0.0) > SYM_TOL * scale:
            raise ValueError("covariance is not symmetric")
        self.cov = 0.5 * (self.cov + self.cov.T)

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    def factor(self) -> np.ndarray:
        """Symmetric square root of the covariance, tolerating singular input."""
        return symmetric_sqrt(self.cov)


def symmetric_sqrt(cov: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(cov)
    top = max(w.max(initial=0.0), 0.0)
    if w.size and w.min() < -PSD_TOL * max(top, np.finfo(float).tiny):
        raise NotPSDError(f"covariance has eigenvalue {w.min():.3e} (largest {top:.3e})")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def sample(gv: GaussianVector, seed: int, count: int, chunk: int = 100_000, threads=None) -> np.ndarray:
    """Draw ``count`` vectors, shape (count, n). Deterministic in ``seed``."""
    root = gv.factor()

    def draw(job):
        i, size = job
        z = rng_for(seed, i).standard_normal((size, gv.n))
        return gv.mean + z @ root

    jobs = list(enumerate(chunk_sizes(count, chunk)))
    return np.concatenate(ordered_map(draw, jobs, threads), axis=0)


def condition(joint: GaussianVector, observed_indices: Sequence[int], observed_values) -> GaussianVector:
    """Law of the unobserved block given the observed block (regression formula).

    The conditional covariance is S11 - S12 S22^{-1} S21 and never looks at
    ``observed_values``; the mean is mu1 + S12 S22^{-1} (x2 - mu2).
    """
    obs = np.asarray(observed_indices, dtype=int).ravel()
    free = np.setdiff1d(np.arange(joint.n), obs)
    x2 = np.asarray(observed_values, dtype=float).ravel()
    if x2.shape != obs.shape:
        raise ValueError("observed_values and observed_indices differ in length")
    if len(np.unique(obs)) != len(obs):
        raise ValueError("repeated observed index")

    s22 = joint.cov[np.ix_(obs, obs)]
    s12 = joint.cov[np.ix_(free, obs)]
    s11 = joint.cov[np.ix_(free, free)]
    cond = np.linalg.cond(s22) if obs.size else 1.0
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularCovarianceError(f"observed block is singular (condition number {cond:.3e})", cond)

    gain = np.linalg.solve(s22, s12.T).T
    cov = s11 - gain @ s12.T
    mean = joint.mean[free] + gain @ (x2 - joint.mean[obs])
    return GaussianVector(mean, 0.5 * (cov + cov.T))


def regression_gain(joint: GaussianVector, observed_indices: Sequence[int]) -> np.ndarray:
    obs = np.asarray(observed_indices, dtype=int).ravel()
    free = np.setdiff1d(np.arange(joint.n), obs)
    s22 = joint.cov[np.ix_(obs, obs)]
    s12 = joint.cov[np.ix_(free, obs)]
    return np.linalg.solve(s22, s12.T).T


def gaussian_density(mu, v, x):
    """Density of N(mu, v) at x (vectorised). v = 0 is a Dirac mass and is rejected."""
    v = float(v)
    if v < 0:
        raise ValueError(f"variance must be nonnegative, got {v}")
    if v == 0:
        raise ValueError("variance 0 is the Dirac mass; use convolve_gaussian(measure, 0.0)")
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - mu) ** 2) / (2.0 * v)) / math.sqrt(2.0 * math.pi * v)


# --------------------------------------------------------------------------
# measures on the line


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"empty grid [{self.lo}, {self.hi}]")
        if self.n < 2:
            raise ValueError("grid needs at least two points")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)


def _trap_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


@dataclass
class Measure1D:
    """Finite measure with a density sampled at ``n_grid`` equispaced points of [lo, hi]."""

    lo: float
    hi: float
    density: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=float)
        if self.density.ndim != 1 or self.density.size < 2:
            raise ValueError("density must be a 1-D array with >= 2 points")
        if not self.hi > self.lo:
            raise ValueError(f"empty support [{self.lo}, {self.hi}]")
        if np.any(self.density < 0):
            raise ValueError("density must be nonnegative")

    @classmethod
    def on_grid(cls, grid: Grid, density, **meta) -> "Measure1D":
        return cls(grid.lo, grid.hi, density, dict(meta))

    @property
    def n_grid(self) -> int:
        return self.density.size

    @property
    def grid(self) -> Grid:
        return Grid(self.lo, self.hi, self.n_grid)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_grid)

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / (self.n_grid - 1)

    @property
    def mass(self) -> float:
        return float(np.dot(_trap_weights(self.n_grid), self.density) * self.dx)

    def normalize(self) -> "Measure1D":
        mass = self.mass
        if mass <= 0:
            raise ValueError("cannot normalize a zero measure")
        return Measure1D(self.lo, self.hi, self.density / mass, dict(self.meta))

    def copy(self) -> "Measure1D":
        return Measure1D(self.lo, self.hi, self.density.copy(), dict(self.meta))

    def __call__(self, t):
        """Piecewise-linear density, zero outside [lo, hi]."""
        return np.interp(t, self.x, self.density, left=0.0, right=0.0)

    def cumulative(self) -> np.ndarray:
        """Mass of (-inf, x_i] at each grid point (trapezoid rule)."""
        f = self.density
        return np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * self.dx)])

    def cdf(self, t):
        """Exact CDF of the piecewise-linear density, divided by the mass."""
        t = np.asarray(t, dtype=float)
        x, f, dx = self.x, self.density, self.dx
        cum = self.cumulative()
        total = cum[-1]
        pos = np.clip((t - self.lo) / dx, 0.0, self.n_grid - 1)
        i = np.minimum(np.floor(pos).astype(int), self.n_grid - 2)
        s = (pos - i) * dx
        slope = (f[i + 1] - f[i]) / dx
        val = cum[i] + f[i] * s + 0.5 * slope * s * s
        return val / total

    def mean(self) -> float:
        w = _trap_weights(self.n_grid) * self.density
        return float(np.dot(w, self.x) / w.sum())

    def variance(self) -> float:
        w = _trap_weights(self.n_grid) * self.density
        mu = np.dot(w, self.x) / w.sum()
        return float(np.dot(w, (self.x - mu) ** 2) / w.sum())

    def resample(self, grid: Grid) -> "Measure1D":
        return Measure1D.on_grid(grid, self(grid.x), **self.meta)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,density\n")
        for xi, fi in zip(self.x, self.density):
            buf.write(f"{xi:.17g},{fi:.17g}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "lo": self.lo,
            "hi": self.hi,
            "n_grid": self.n_grid,
            "mass": self.mass,
            "density": [float(v) for v in self.density],
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Measure1D":
        d = json.loads(text)
        if len(d["density"]) != d["n_grid"]:
            raise ValueError("n_grid does not match density length")
        return cls(d["lo"], d["hi"], np.array(d["density"], dtype=float))

    @classmethod
    def from_csv(cls, text: str) -> "Measure1D":
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        x, f = data[:, 0], data[:, 1]
        if not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=1e-12):
            raise ValueError("CSV grid is not uniform")
        return cls(float(x[0]), float(x[-1]), f)


@dataclass
class EmpiricalMeasure:
    """Weighted sum of Dirac masses."""

    atoms: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float).ravel()
        if self.weights is None:
            self.weights = np.ones_like(self.atoms)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.weights.shape != self.atoms.shape:
            raise ValueError("atoms and weights differ in length")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def normalize(self) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.atoms.copy(), self.weights / self.mass)

    def rescale(self, t: float) -> "EmpiricalMeasure":
        if not t > 0:
            raise ValueError("rescaling factor must be positive")
        return EmpiricalMeasure(self.atoms * t, self.weights.copy())

    def cdf(self, t, side: str = "right"):
        order = np.argsort(self.atoms, kind="stable")
        a = self.atoms[order]
        cw = np.concatenate([[0.0], np.cumsum(self.weights[order])])
        idx = np.searchsorted(a, t, side=side)
        return cw[idx] / cw[-1]

    def histogram(self, grid: Grid) -> Measure1D:
        """Bin the atoms into cells centred on the grid points."""
        dx = grid.dx
        edges = np.concatenate([grid.x - 0.5 * dx, [grid.hi + 0.5 * dx]])
        counts, _ = np.histogram(self.atoms, bins=edges, weights=self.weights)
        return Measure1D.on_grid(grid, counts / dx)


# --------------------------------------------------------------------------
# operations on measures


def gaussian_measure(v: float, grid: Grid, mu: float = 0.0) -> Measure1D:
    return Measure1D.on_grid(grid, gaussian_density(mu, v, grid.x))


def convolve_gaussian(measure: Measure1D, v: float, crop: bool = False) -> Measure1D:
    """gamma_v * measure on a grid widened by 8 standard deviations.

    With ``crop`` the result is cut back to the input grid.
    """
    v = float(v)
    if v < 0:
        raise ValueError(f"variance must be nonnegative, got {v}")
    if v == 0:
        return measure.copy()
    dx = measure.dx
    sd = math.sqrt(v)
    if dx > sd / 4:
        warnings.warn(f"grid spacing {dx:.3g} is coarse for Gaussian width {sd:.3g}", RuntimeWarning, stacklevel=2)
    pad = int(math.ceil(8.0 * sd / dx))
    kernel = gaussian_density(0.0, v, dx * np.arange(-pad, pad + 1))
    weights = measure.density * _trap_weights(measure.n_grid) * dx
    out = signal.convolve(weights, kernel, mode="full", method="auto")
    out = np.clip(out, 0.0, None)
    if crop:
        return Measure1D(measure.lo, measure.hi, out[pad : pad + measure.n_grid], dict(measure.meta))
    return Measure1D(measure.lo - pad * dx, measure.hi + pad * dx, out, dict(measure.meta))


def rescale_pushforward(measure: Measure1D, t: float) -> Measure1D:
    """Pushforward under x -> t x."""
    t = float(t)
    if not t > 0:
        raise ValueError(f"rescaling factor must be positive, got {t}")
    return Measure1D(measure.lo * t, measure.hi * t, measure.density / t, dict(measure.meta))


class Deconvolution(NamedTuple):
    measure: Measure1D
    residual: float
    reliable: bool
    clipped_mass: float


def deconvolve_gaussian(measure: Measure1D, v: float, reg: float = 1e-8, threshold: float = 1e-3) -> Deconvolution:
    """Tikhonov-regularised inverse of ``convolve_gaussian``.

    Characteristic functions are divided by exp(-v xi^2 / 2) with the filter
    g / (g^2 + reg).  Negative ringing is clipped; ``residual`` is the sup
    norm of gamma_v * result - measure on the input grid.
    """
    v = float(v)
    if v < 0:
        raise ValueError(f"variance must be nonnegative, got {v}")
    if not reg > 0:
        raise ValueError("regularisation must be positive")
    if v == 0:
        return Deconvolution(measure.copy(), 0.0, True, 0.0)

    n = measure.n_grid
    size = 1 << int(math.ceil(math.log2(4 * n)))
    padded = np.zeros(size)
    padded[:n] = measure.density
    xi = 2.0 * math.pi * np.fft.rfftfreq(size, measure.dx)
    g = np.exp(-0.5 * v * xi * xi)
    spec = np.fft.rfft(padded) * g / (g * g + reg)
    raw = np.fft.irfft(spec, size)[:n]
    negative = np.clip(raw, None, 0.0)
    clipped_mass = float(-np.dot(_trap_weights(n), negative) * measure.dx)
    result = Measure1D(measure.lo, measure.hi, np.clip(raw, 0.0, None), dict(measure.meta))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        forward = convolve_gaussian(result, v, crop=True)
    residual = float(np.abs(forward.density - measure.density).max())
    return Deconvolution(result, residual, residual <= threshold, clipped_mass)


def _as_probability(m, name):
    mass = m.mass
    if abs(mass - 1.0) > 1e-6:
        raise ValueError(f"{name} is not normalized (mass {mass:.8g}); call normalize() first")
    return m


def _cdf_pair(m, pts):
    """CDF values just left and right of each point."""
    if isinstance(m, EmpiricalMeasure):
        return m.cdf(pts, side="left"), m.cdf(pts, side="right")
    c = m.cdf(pts)
    return c, c


def _support_points(m):
    return m.atoms if isinstance(m, EmpiricalMeasure) else m.x


def ks_distance(a, b) -> float:
    """Sup distance between the CDFs of two probability measures."""
    _as_probability(a, "first measure")
    _as_probability(b, "second measure")
    pts = np.union1d(_support_points(a), _support_points(b))
    al, ar = _cdf_pair(a, pts)
    bl, br = _cdf_pair(b, pts)
    return float(min(1.0, max(np.abs(al - bl).max(), np.abs(ar - br).max())))


def wasserstein1(a, b) -> float:
    """First Wasserstein distance, integral of |F_a - F_b|."""
    _as_probability(a, "first measure")
    _as_probability(b, "second measure")
    pts = np.union1d(_support_points(a), _support_points(b))
    lo, hi = pts[0], pts[-1]
    fine = np.union1d(pts, np.linspace(lo, hi, 8 * len(pts)))
    mid = 0.5 * (fine[1:] + fine[:-1])
    _, fa = _cdf_pair(a, mid)
    _, fb = _cdf_pair(b, mid)
    return float(np.sum(np.abs(fa - fb) * np.diff(fine)))
