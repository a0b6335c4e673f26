"""Dimensional constants s_m, d_m, h_m and the variance-shift parameterization.

The three constants are the leading coefficients of the spectral-function
asymptotics for the value, gradient and Hessian of a random band-limited
eigenfunction expansion on an m-dimensional manifold of unit volume.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from scipy.special import gammaln

_LOG_4PI = math.log(4.0 * math.pi)

# slack used when a float r sits on the boundary r = (m+2)/(m+4)
_BOUNDARY_SLACK = 1e-15


class ConstraintError(ValueError):
    """Raised when r violates the constraint (C_m): r >= (m+2)/(m+4)."""


@dataclass(frozen=True)
class SpectralConstants:
    m: int
    s: float
    d: float
    h: float
    log_s: float
    log_d: float
    log_h: float

    def as_dict(self) -> dict:
        return {"m": self.m, "s": self.s, "d": self.d, "h": self.h}


@dataclass(frozen=True)
class OmegaParams:
    m: int
    L: float
    r: float
    omega_bar: float
    omega: float
    s_omega: float


def _check_dim(m) -> int:
    if isinstance(m, bool) or int(m) != m:
        raise TypeError(f"dimension must be an integer, got {m!r}")
    m = int(m)
    if m < 1:
        raise ValueError(f"dimension must be >= 1, got {m}")
    return m


def spectral_constants(m: int) -> SpectralConstants:
    """Return (s_m, d_m, h_m), evaluated in log space.

    For very large m the plain values underflow to 0; the ``log_*`` fields
    stay finite for every m.
    """
    m = _check_dim(m)
    base = -0.5 * m * _LOG_4PI
    log_s = base - gammaln(1.0 + 0.5 * m)
    log_d = base - math.log(2.0) - gammaln(2.0 + 0.5 * m)
    log_h = base - math.log(4.0) - gammaln(3.0 + 0.5 * m)
    return SpectralConstants(
        m=m,
        s=math.exp(log_s),
        d=math.exp(log_d),
        h=math.exp(log_h),
        log_s=float(log_s),
        log_d=float(log_d),
        log_h=float(log_h),
    )


def constant_identity_residuals(m: int) -> dict:
    """Relative residuals of s = h(m+2)(m+4) and d = (m+4)h."""
    c = spectral_constants(m)
    return {
        "s_vs_h": abs(c.s - c.h * (m + 2) * (m + 4)) / c.s,
        "d_vs_h": abs(c.d - (m + 4) * c.h) / c.d,
    }


def r_lower_bound(m: int) -> float:
    m = _check_dim(m)
    return (m + 2) / (m + 4)


def _constraint_status(m: int, r) -> int:
    """-1 violated, 0 on the boundary, +1 strictly inside."""
    if isinstance(r, Fraction) or isinstance(r, int):
        lhs = Fraction(m + 4) * Fraction(r)
        rhs = Fraction(m + 2)
        return (lhs > rhs) - (lhs < rhs)
    bound = (m + 2) / (m + 4)
    if abs(r - bound) <= _BOUNDARY_SLACK * max(1.0, bound):
        return 0
    exact = Fraction(m + 4) * Fraction(float(r)) - Fraction(m + 2)
    return (exact > 0) - (exact < 0)


def check_constraint(m: int, r) -> int:
    m = _check_dim(m)
    if r <= 0:
        raise ConstraintError(f"r must be positive, got {r}")
    status = _constraint_status(m, r)
    if status < 0:
        raise ConstraintError(
            f"constraint (C_m) violated: r={float(r)!r} < (m+2)/(m+4) = {(m + 2) / (m + 4)!r} for m={m}"
        )
    return status


def omega_params(m: int, L: float, r) -> OmegaParams:
    """Variance of the constant shift that makes E[u_omega(p)^2] = s_m^omega L^m.

    ``s_omega`` is computed both as r d^2/h and as r (m+4)/(m+2) s; the two
    must agree to 1e-12 relative.
    """
    m = _check_dim(m)
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    status = check_constraint(m, r)
    c = spectral_constants(m)
    rf = float(r)

    s_omega = rf * c.d * c.d / c.h
    s_omega_alt = rf * (m + 4) / (m + 2) * c.s
    if abs(s_omega - s_omega_alt) > 1e-12 * s_omega:
        raise ArithmeticError(f"s_omega mismatch: {s_omega} vs {s_omega_alt}")

    if status == 0:
        omega_bar = 0.0
        s_omega = c.s
    else:
        omega_bar = (rf * (m + 4) / (m + 2) - 1.0) * c.s
    return OmegaParams(
        m=m, L=float(L), r=rf, omega_bar=omega_bar, omega=omega_bar * float(L) ** m, s_omega=s_omega
    )


def weyl_dimension_estimate(m: int, L: float) -> float:
    """Leading Weyl term s_m L^m for dim U^L."""
    m = _check_dim(m)
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    return spectral_constants(m).s * float(L) ** m
