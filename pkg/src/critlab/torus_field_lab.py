"""Random band-limited fields on the flat torus T^m = R^m / Z^m.

U^L is spanned by 1, sqrt(2) cos(2 pi k.x), sqrt(2) sin(2 pi k.x) with
0 < |2 pi k| <= L, one k from each pair {k, -k}.  The field is
u = (a_0 + X) + sum_k sqrt(2) (a_k cos + b_k sin) with standard normal
coefficients and an independent N(0, omega) shift X.  All covariances are
finite lattice sums and do not depend on the point, so the Kac-Rice density
is evaluated at p = 0.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._streams import ordered_map, rng_for
from .gaussian_core import (
    EmpiricalMeasure,
    GaussianVector,
    Grid,
    Measure1D,
    condition,
    ks_distance,
    symmetric_sqrt,
)
from .limit_law import sigma_mr
from .spectral_constants import omega_params, spectral_constants

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
MAX_DIM = 5000


@dataclass(frozen=True, eq=False)
class TorusSpectrum:
    m: int
    L: float
    frequencies: np.ndarray  # (P, m) integer lattice vectors, one per +-k pair

    @property
    def n_modes(self) -> int:
        return self.frequencies.shape[0]

    @property
    def dim(self) -> int:
        return 1 + 2 * self.n_modes

    @property
    def kmax(self) -> float:
        if self.n_modes == 0:
            return 0.0
        return float(np.sqrt((self.frequencies**2).sum(axis=1)).max())

    @property
    def eigenvalues(self) -> np.ndarray:
        return TWO_PI**2 * (self.frequencies**2).sum(axis=1)


def build_spectrum(m: int, L: float, max_dim: int = MAX_DIM, allow_m1: bool = False) -> TorusSpectrum:
    """All lattice modes with 4 pi^2 |k|^2 <= L^2."""
    if int(m) != m or not (m in (2, 3) or (allow_m1 and m == 1)):
        raise ValueError(f"torus simulations support m in {{2, 3}}, got m={m}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    m = int(m)
    kmax = int(math.floor(L / TWO_PI))
    # cheap count before enumerating: ball volume plus boundary slack
    ball = math.pi ** (m / 2) / math.gamma(1 + m / 2) * (L / TWO_PI + 1) ** m
    if ball > 4 * max_dim:
        raise ValueError(f"dim U^L would exceed the cap {max_dim} (L={L}, m={m})")
    rng = np.arange(-kmax, kmax + 1)
    pts = np.array(list(itertools.product(rng, repeat=m)), dtype=np.int64).reshape(-1, m)
    norm2 = (pts**2).sum(axis=1)
    keep = (norm2 > 0) & (TWO_PI**2 * norm2 <= L * L * (1 + 1e-15))
    pts = pts[keep]
    # representative of {k, -k}: first nonzero coordinate positive
    first = np.array([row[np.flatnonzero(row)[0]] for row in pts]) if len(pts) else np.zeros(0)
    pts = pts[first > 0]
    order = np.lexsort(pts.T[::-1]) if len(pts) else np.zeros(0, dtype=int)
    pts = pts[order]
    if 1 + 2 * len(pts) > max_dim:
        raise ValueError(f"dim U^L = {1 + 2 * len(pts)} exceeds the cap {max_dim}")
    return TorusSpectrum(m, float(L), pts)


@dataclass(eq=False)
class TorusField:
    spectrum: TorusSpectrum
    coeffs: np.ndarray  # [a_0, a_1..a_P (cos), b_1..b_P (sin)]
    shift: float = 0.0

    @property
    def cos_coeffs(self):
        return self.coeffs[1 : 1 + self.spectrum.n_modes]

    @property
    def sin_coeffs(self):
        return self.coeffs[1 + self.spectrum.n_modes :]


def sample_field(spectrum: TorusSpectrum, omega: float, seed: int) -> TorusField:
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    rng = rng_for(seed, 0x7F1E)
    coeffs = rng.standard_normal(spectrum.dim)
    shift = math.sqrt(omega) * rng.standard_normal() if omega > 0 else 0.0
    return TorusField(spectrum, coeffs, float(shift))


def _phases(spectrum, p):
    p = np.atleast_2d(np.asarray(p, dtype=float))
    # reduce k.p mod 1 before scaling so integer translations are exact
    return TWO_PI * np.mod(p @ spectrum.frequencies.T.astype(float), 1.0)


def eval_field(f: TorusField, p):
    """Value, gradient and Hessian at p (a point or an (N, m) array of points)."""
    sp = f.spectrum
    p_arr = np.asarray(p, dtype=float)
    single = p_arr.ndim == 1
    th = _phases(sp, p_arr)
    c, s = np.cos(th), np.sin(th)
    a = math.sqrt(2.0) * f.cos_coeffs
    b = math.sqrt(2.0) * f.sin_coeffs
    k = TWO_PI * sp.frequencies.astype(float)
    value = f.coeffs[0] + f.shift + c @ a + s @ b
    d1 = -s * a + c * b  # derivative of each mode along its frequency
    grad = d1 @ k
    d2 = -(c * a + s * b)
    hess = np.einsum("np,pi,pj->nij", d2, k, k)
    if single:
        return float(value[0]), grad[0], hess[0]
    return value, grad, hess


# exposed under the short name as well
eval = eval_field  # noqa: A001


# --------------------------------------------------------------------------
# exact covariances


def feature_matrix(spectrum: TorusSpectrum, p=None) -> tuple[np.ndarray, list[str]]:
    """Rows: basis functions; columns: (u, du_i, d2u_ij for i <= j) at p."""
    m = spectrum.m
    p = np.zeros(m) if p is None else np.asarray(p, dtype=float)
    th = _phases(spectrum, p)[0]
    c, s = np.cos(th), np.sin(th)
    k = TWO_PI * spectrum.frequencies.astype(float)
    r2 = math.sqrt(2.0)
    iu = list(zip(*np.triu_indices(m)))
    names = ["u"] + [f"d{i}" for i in range(m)] + [f"h{i}{j}" for i, j in iu]
    n_feat = 1 + m + len(iu)
    F = np.zeros((spectrum.dim, n_feat))
    F[0, 0] = 1.0
    P = spectrum.n_modes
    cos_rows = slice(1, 1 + P)
    sin_rows = slice(1 + P, 1 + 2 * P)
    F[cos_rows, 0] = r2 * c
    F[sin_rows, 0] = r2 * s
    for i in range(m):
        F[cos_rows, 1 + i] = -r2 * s * k[:, i]
        F[sin_rows, 1 + i] = r2 * c * k[:, i]
    for col, (i, j) in enumerate(iu):
        F[cos_rows, 1 + m + col] = -r2 * c * k[:, i] * k[:, j]
        F[sin_rows, 1 + m + col] = -r2 * s * k[:, i] * k[:, j]
    return F, names


def joint_gaussian(spectrum: TorusSpectrum, omega: float = 0.0) -> GaussianVector:
    """(u_omega, du, Hess u) at the reference point p = 0."""
    F, _ = feature_matrix(spectrum)
    cov = F.T @ F
    cov[0, 0] += omega
    return GaussianVector(np.zeros(cov.shape[0]), cov)


def _lattice_moment(spectrum, idx):
    """sum over modes of 2 prod_t (2 pi k_{idx_t}) computed in exact integers first."""
    k = spectrum.frequencies
    prod = np.ones(len(k), dtype=np.int64)
    for i in idx:
        prod = prod * k[:, i]
    return 2.0 * TWO_PI ** len(idx) * float(prod.sum())


def covariance_report(spectrum: TorusSpectrum) -> dict:
    """Exact lattice-sum covariances versus the leading-order terms."""
    m, L = spectrum.m, spectrum.L
    c = spectral_constants(m)
    s_lead = c.s * L**m
    d_lead = c.d * L ** (m + 2)
    h_lead = c.h * L ** (m + 4)
    d = lambda i, j: float(i == j)  # noqa: E731

    grad = {(i, j): _lattice_moment(spectrum, (i, j)) for i in range(m) for j in range(m)}
    uh = {(i, j): -_lattice_moment(spectrum, (i, j)) for i in range(m) for j in range(m)}
    hh = {}
    for idx in itertools.product(range(m), repeat=4):
        i, j, k, l = idx
        hh[idx] = _lattice_moment(spectrum, idx)
    lead_hh = lambda i, j, k, l: h_lead * (d(i, j) * d(k, l) + d(i, k) * d(j, l) + d(i, l) * d(j, k))  # noqa: E731

    ratios = {
        "u_u": spectrum.dim / s_lead,
        "du_du": {f"{i}{i}": grad[(i, i)] / d_lead for i in range(m)},
        "u_hess": {f"{i}{i}": uh[(i, i)] / (-d_lead) for i in range(m)},
        "hess_hess": {
            "".join(map(str, idx)): hh[idx] / lead_hh(*idx) for idx in hh if lead_hh(*idx) != 0
        },
    }
    # entries whose leading term vanishes; on the torus they vanish exactly
    F, names = feature_matrix(spectrum)
    cov = F.T @ F
    zeros = {
        "du_du_offdiag": max([abs(grad[(i, j)]) for i in range(m) for j in range(m) if i != j] or [0.0]),
        "u_hess_offdiag": max([abs(uh[(i, j)]) for i in range(m) for j in range(m) if i != j] or [0.0]),
        "hess_hess_odd": max([abs(v) for idx, v in hh.items() if lead_hh(*idx) == 0] or [0.0]),
        "u_du": float(np.abs(cov[0, 1 : 1 + m]).max()),
        "du_hess": float(np.abs(cov[1 : 1 + m, 1 + m :]).max()),
    }
    return {
        "m": m,
        "L": L,
        "dim": spectrum.dim,
        "weyl": s_lead,
        "ratios": ratios,
        "zeros": zeros,
        "max_ratio_error": max(abs(x - 1) for x in _flatten(ratios)),
    }


def _flatten(d):
    for v in d.values():
        if isinstance(v, dict):
            yield from _flatten(v)
        else:
            yield v


# --------------------------------------------------------------------------
# critical points


@dataclass
class CriticalPointRecord:
    location: np.ndarray
    value: float
    morse_index: int
    hessian_det: float


class CriticalPoints(list):
    """List of CriticalPointRecord plus search diagnostics."""

    def __init__(self, records=(), morse=True, dropped=0, n_seeds=0):
        super().__init__(records)
        self.morse = morse
        self.dropped = dropped
        self.n_seeds = n_seeds

    @property
    def euler_sum(self) -> int:
        return int(sum((-1) ** r.morse_index for r in self))


def hessian_scale(spectrum: TorusSpectrum) -> float:
    """Standard deviation of a diagonal Hessian entry (over the field ensemble)."""
    if spectrum.n_modes == 0:
        return 1.0
    return math.sqrt(_lattice_moment(spectrum, (0, 0, 0, 0)))


def default_grid_n(spectrum: TorusSpectrum) -> int:
    return max(8, int(math.ceil(6 * spectrum.kmax)))


def _periodic_dedupe(points, tol):
    kept = []
    for p in points:
        if not any(np.max(np.abs((p - q + 0.5) % 1.0 - 0.5)) < tol for q in kept):
            kept.append(p)
    return kept


def find_critical_points(f: TorusField, grid_n: int | None = None, tol: float = 1e-10, max_iter: int = 60,
                         dedupe: float = 1e-6, degeneracy: float = 1e-8) -> CriticalPoints:
    """Newton's method on du from every point of a regular grid_n^m seed grid."""
    sp = f.spectrum
    m = sp.m
    if sp.n_modes == 0:
        return CriticalPoints([], morse=False, n_seeds=0)
    if grid_n is None:
        grid_n = default_grid_n(sp)
    if grid_n < 4 * sp.kmax:
        log.warning("grid_n=%d is below 4 * max frequency (%.2f)", grid_n, 4 * sp.kmax)
    axes = [np.arange(grid_n) / grid_n] * m
    p = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    n_seeds = len(p)
    active = np.ones(len(p), dtype=bool)
    _, g, h = eval_field(f, p)
    gn = np.linalg.norm(g, axis=1)
    for _ in range(max_iter):
        idx = np.flatnonzero(active & (gn > tol * 1e-2))
        if idx.size == 0:
            break
        step = (np.linalg.pinv(h[idx], hermitian=True) @ g[idx][..., None])[..., 0]
        # backtrack until |du| decreases; seeds that cannot improve are frozen
        t = np.ones(idx.size)
        moved = np.zeros(idx.size, dtype=bool)
        for _ in range(8):
            todo = ~moved
            if not todo.any():
                break
            q = np.mod(p[idx[todo]] - t[todo, None] * step[todo], 1.0)
            _, gq, hq = eval_field(f, q)
            gq_n = np.linalg.norm(gq, axis=1)
            better = gq_n < gn[idx[todo]]
            sel = idx[todo][better]
            p[sel], g[sel], h[sel], gn[sel] = q[better], gq[better], hq[better], gq_n[better]
            moved[np.flatnonzero(todo)[better]] = True
            t[todo] *= 0.5
        active[idx[~moved]] = False
    _, g, h = eval_field(f, p)
    ok = np.abs(g).max(axis=1) <= tol
    dropped = int((~ok).sum())
    if dropped:
        log.debug("%d of %d seeds did not converge", dropped, n_seeds)
    pts = _periodic_dedupe(p[ok], dedupe)
    scale = hessian_scale(sp) ** m
    records = []
    morse = True
    for q in pts:
        val, _, hq = eval_field(f, q)
        eig = np.linalg.eigvalsh(hq)
        det = float(np.prod(eig))
        if abs(det) < degeneracy * scale:
            morse = False
        records.append(CriticalPointRecord(q, val, int((eig < 0).sum()), det))
    return CriticalPoints(records, morse=morse, dropped=dropped, n_seeds=n_seeds)


# --------------------------------------------------------------------------
# empirical statistics


@dataclass
class ComplexityResult:
    measure: EmpiricalMeasure
    mean_count: float
    std_error: float
    rejected_fraction: float
    n_used: int
    counts: np.ndarray
    euler_sums: np.ndarray
    rows: list = field(default_factory=list)  # (value, morse_index, field_id)


def empirical_complexity(spectrum: TorusSpectrum, omega: float, n_fields: int, seed: int,
                         grid_n: int | None = None, threads=None) -> ComplexityResult:
    """Pooled critical values of ``n_fields`` independent Morse samples."""
    if n_fields < 1:
        raise ValueError("need at least one field")

    def one(i):
        f = sample_field(spectrum, omega, rng_for(seed, i).integers(2**62))
        return find_critical_points(f, grid_n)

    results = ordered_map(one, range(n_fields), threads)
    rows, counts, euler, values = [], [], [], []
    for i, cp in enumerate(results):
        if not cp.morse:
            continue
        counts.append(len(cp))
        euler.append(cp.euler_sum)
        for rec in cp:
            rows.append((rec.value, rec.morse_index, i))
            values.append(rec.value)
    n_used = len(counts)
    rejected = 1 - n_used / n_fields
    if rejected > 0:
        log.info("rejected %d non-Morse fields of %d", n_fields - n_used, n_fields)
    counts = np.asarray(counts, dtype=float)
    mean = float(counts.mean()) if n_used else float("nan")
    se = float(counts.std(ddof=1) / math.sqrt(n_used)) if n_used > 1 else float("nan")
    measure = EmpiricalMeasure(np.asarray(values, dtype=float), np.ones(len(values)))
    return ComplexityResult(measure, mean, se, rejected, n_used, counts, np.asarray(euler), rows)


# --------------------------------------------------------------------------
# Kac-Rice


def _kac_rice_parts(spectrum, omega):
    m = spectrum.m
    joint = joint_gaussian(spectrum, omega)
    grad_idx = list(range(1, 1 + m))
    cond = condition(joint, grad_idx, np.zeros(m))
    s_grad = joint.cov[np.ix_(grad_idx, grad_idx)]
    sign, logdet = np.linalg.slogdet(TWO_PI * s_grad)
    if sign <= 0:
        raise np.linalg.LinAlgError("gradient covariance is singular")
    return cond, math.exp(-0.5 * logdet)


def _hessians(vec, m):
    iu = np.triu_indices(m)
    H = np.zeros(vec.shape[:-1] + (m, m))
    H[..., iu[0], iu[1]] = vec
    H[..., iu[1], iu[0]] = vec
    return H


def _abs_det(vec, m):
    if m == 1:
        return np.abs(vec[..., 0])
    if m == 2:
        return np.abs(vec[..., 0] * vec[..., 2] - vec[..., 1] ** 2)
    return np.abs(np.linalg.det(_hessians(vec, m)))


def _sample_conditional(cond, n, seed, chunk):
    from .gaussian_core import sample as sample_gaussian

    return sample_gaussian(cond, seed, n, chunk=chunk, threads=1)


def kac_rice_total(spectrum: TorusSpectrum, omega: float, n_cond_samples: int, seed: int) -> tuple[float, float]:
    """N^L = det(2 pi S(du))^{-1/2} E(|det Hess u| | du = 0), with its MC error."""
    m = spectrum.m
    cond, pref = _kac_rice_parts(spectrum, omega)
    draws = _sample_conditional(cond, n_cond_samples, seed, 200_000)
    d = _abs_det(draws[:, 1:], m)
    return float(pref * d.mean()), float(pref * d.std(ddof=1) / math.sqrt(len(d)))


def kac_rice_density(spectrum: TorusSpectrum, omega: float, value_grid: Grid, n_cond_samples: int, seed: int,
                     chunk: int = 20_000) -> Measure1D:
    """Density of the expected critical-value measure at each value t.

    f(t) = det(2 pi S(du))^{-1/2} p_u(t) E(|det H| | u = t, du = 0).
    The inner expectation uses common draws: H = H0 + t b with H0 from the
    conditional law of H given (u = 0, du = 0).
    """
    m = spectrum.m
    cond, pref = _kac_rice_parts(spectrum, omega)
    var_u = cond.cov[0, 0]
    if not var_u > 0:
        raise ValueError("value variance vanishes")
    gain = cond.cov[1:, 0] / var_u
    h_cond = GaussianVector(np.zeros(len(gain)), cond.cov[1:, 1:] - np.outer(gain, cond.cov[0, 1:]))
    t = value_grid.x
    total = np.zeros_like(t)
    total_sq = np.zeros_like(t)
    done = 0
    from .gaussian_core import sample as sample_gaussian

    draws = sample_gaussian(h_cond, seed, n_cond_samples, chunk=chunk, threads=1)
    for start in range(0, n_cond_samples, chunk):
        h0 = draws[start : start + chunk]
        vals = _abs_det(h0[:, None, :] + t[None, :, None] * gain, m)
        total += vals.sum(axis=0)
        total_sq += (vals * vals).sum(axis=0)
        done += len(h0)
    mean = total / done
    se = np.sqrt(np.maximum(total_sq / done - mean * mean, 0) / max(done - 1, 1))
    p_u = np.exp(-0.5 * t * t / var_u) / math.sqrt(2 * math.pi * var_u)
    dens = pref * p_u * mean
    return Measure1D.on_grid(value_grid, dens, std_error=pref * p_u * se, n_cond_samples=n_cond_samples)


# --------------------------------------------------------------------------
# universality


def universality_check(m: int, L: float, r: float, n_fields: int, seed: int, grid_n: int | None = None,
                       limit_grid: Grid | None = None, threads=None, rescale: bool = True,
                       symmetrize: bool = True) -> tuple[float, dict]:
    """KS distance between rescaled empirical critical values and sigma_{m,r}.

    u and -u have the same law, so with ``symmetrize`` the values of each
    field are pooled with their negatives.  This keeps the estimator
    unbiased and removes the per-field common shift (a_0 + X), which
    otherwise dominates the KS noise.  The raw KS is kept in the report.
    """
    if m != 2:
        raise ValueError("universality_check runs at m = 2")
    params = omega_params(m, L, r)
    spectrum = build_spectrum(m, L)
    res = empirical_complexity(spectrum, params.omega, n_fields, seed, grid_n, threads)
    scale = math.sqrt(params.s_omega * L**m) if rescale else 1.0
    emp = res.measure.rescale(1.0 / scale).normalize()
    limit = sigma_mr(m, r, limit_grid) if limit_grid is not None else sigma_mr(m, r)
    ks_raw = ks_distance(emp, limit)
    n_vals = len(emp.atoms)
    if symmetrize:
        emp = EmpiricalMeasure(np.concatenate([emp.atoms, -emp.atoms])).normalize()
    ks = ks_distance(emp, limit)
    report = {
        "m": m,
        "L": L,
        "r": r,
        "omega": params.omega,
        "s_omega": params.s_omega,
        "dim": spectrum.dim,
        "n_fields": n_fields,
        "n_used": res.n_used,
        "n_values": n_vals,
        "mean_count": res.mean_count,
        "count_std_error": res.std_error,
        "rejected_fraction": res.rejected_fraction,
        "ks": ks,
        "ks_raw": ks_raw,
        "symmetrized": symmetrize,
        # 95% point of the KS statistic for independent draws; values within
        # a field are dependent, so this is indicative only
        "ks_noise_floor": 1.36 / math.sqrt(max(n_vals, 1)),
        "rescaled": rescale,
    }
    return ks, report
