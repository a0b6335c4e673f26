import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats

from critlab.gaussian_core import Grid
from critlab.random_matrices import (
    MatrixEnsemble,
    abs_poly_gauss,
    ensemble_log_density,
    expected_abs_det_goe,
    expected_abs_det_mc,
    expected_abs_det_shifted,
    goe_log_density,
    log_selberg_Z,
    rescale_correlation,
    rho_exact,
    rho_exact_values,
    rho_mc,
    rho_mc_smooth,
    sample_matrices,
    selberg_Z,
    selberg_Z_quadrature,
    semicircle_density,
)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        MatrixEnsemble(3, -1.0, 1.0)
    with pytest.raises(ValueError):
        MatrixEnsemble(0, 0.0, 1.0)
    with pytest.raises(ValueError):
        MatrixEnsemble(2, 0.0, 0.0)


@pytest.mark.parametrize("u", [0.0, 0.8, -0.3])
def test_entry_covariance_matches_samples(u):
    ens = MatrixEnsemble(3, u, 0.5)
    a = sample_matrices(ens, 200_000, seed=5)
    assert np.allclose(a, np.swapaxes(a, 1, 2))
    idx, cov = ens.entry_covariance()
    entries = a[:, idx[:, 0], idx[:, 1]]
    assert_allclose(np.cov(entries.T), cov, atol=0.02)


def test_sampling_deterministic_across_threads():
    ens = MatrixEnsemble(4, 0.3, 1.0)
    a = sample_matrices(ens, 5000, seed=9, chunk=700, threads=1)
    b = sample_matrices(ens, 5000, seed=9, chunk=700, threads=3)
    assert np.array_equal(a, b)


def test_selberg_small_cases():
    assert_allclose(selberg_Z(1), math.sqrt(2 * math.pi), rtol=1e-14)
    for m in (1, 2):
        assert_allclose(selberg_Z(m), selberg_Z_quadrature(m), rtol=1e-10)
    assert_allclose(log_selberg_Z(3, 0.7), log_selberg_Z(3) + 3 * math.log(1.4), rtol=1e-14)
    with pytest.raises(ValueError):
        log_selberg_Z(0)


def test_goe_density_is_ensemble_density_at_u0():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((10, 3, 3))
    a = a + np.swapaxes(a, 1, 2)
    assert_allclose(ensemble_log_density(a, 0.0, 0.8), goe_log_density(a, 0.8), rtol=1e-12)


def test_ensemble_density_m1_is_normal():
    x = np.linspace(-3, 3, 7).reshape(-1, 1, 1)
    for u in (0.5, -0.3):
        got = np.exp(ensemble_log_density(x, u, 0.6))
        assert_allclose(got, stats.norm.pdf(x.ravel(), scale=math.sqrt(u + 1.2)), rtol=1e-12)


def test_goe_density_integrates_m2():
    v = 0.7
    f = lambda c, b, a: math.exp(goe_log_density(np.array([[a, b], [b, c]]), v))  # noqa: E731
    lim = 10 * math.sqrt(v)
    val, _ = integrate.tplquad(f, -lim, lim, -lim, lim, -lim, lim, epsrel=1e-7)
    # |dA| = 2^{binom(m,2)/2} da_11 da_12 da_22
    assert_allclose(math.sqrt(2) * val, 1.0, rtol=1e-5)


def test_abs_poly_gauss_against_quad():
    roots = np.array([-1.3, 0.2, 0.9])
    s = 0.8
    f = lambda t: abs(np.prod(t - roots)) * math.exp(-t * t / (2 * s * s))  # noqa: E731
    pts = sorted(roots)
    val = sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-13)[0] for a, b in zip([-np.inf] + pts, pts + [np.inf]))
    assert_allclose(abs_poly_gauss(roots, s), val, rtol=1e-10)


def test_rho_21_at_zero():
    assert_allclose(rho_exact_values(2, 1.0, 0.0), 1 / (2 * math.sqrt(2 * math.pi)), rtol=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_rho_exact_moments(n):
    v = 0.6
    f = lambda t: float(rho_exact_values(n, v, t))  # noqa: E731
    mass = integrate.quad(f, -np.inf, np.inf, epsabs=1e-13)[0]
    second = integrate.quad(lambda t: t * t * f(t), -np.inf, np.inf, epsabs=1e-12)[0]
    assert_allclose(mass, 1.0, atol=1e-10)
    # E tr A^2 / n = (n+1) v
    assert_allclose(second, (n + 1) * v, rtol=1e-9)


def test_rho_exact_symmetric():
    x = np.linspace(0.1, 4, 9)
    assert_allclose(rho_exact_values(3, 1.0, x), rho_exact_values(3, 1.0, -x), rtol=1e-13)


def test_rho_mc_agrees_with_exact():
    n, v = 3, 0.5
    mc = rho_mc(n, v, n_samples=200_000, seed=3)
    assert_allclose(np.sum(mc.density) * mc.measure.dx, 1.0, rtol=1e-12)
    ex = rho_exact_values(n, v, mc.x)
    z = np.abs(mc.density - ex) / np.maximum(mc.std_error, 1e-4)
    assert np.mean(z < 4) > 0.97


def test_rho_mc_smooth_agrees_with_exact():
    n, v = 4, 1.0
    mc = rho_mc_smooth(n, v, Grid(-7, 7, 141), n_samples=40_000, seed=4)
    ex = rho_exact_values(n, v, mc.x)
    assert np.abs(mc.density - ex).max() < 5 * mc.std_error.max() + 1e-4


def test_semicircle_limit():
    n = 60
    mc = rho_mc_smooth(n, 1.0 / n, Grid(-2.5, 2.5, 101), n_samples=2000, seed=1)
    # scaled GOE spectrum tends to the semicircle of radius 2
    l1 = np.sum(np.abs(mc.density - semicircle_density(1.0, mc.x))) * mc.measure.dx
    assert l1 < 0.05
    assert_allclose(integrate.quad(lambda t: semicircle_density(1.0, t), -2, 2)[0], 1.0, rtol=1e-10)


def test_rescale_correlation_identity():
    rho = rho_exact(2, 1.0)
    r2 = rescale_correlation(rho, 2.0)
    assert r2.v == 0.25
    y = np.linspace(-2, 2, 11)
    assert_allclose(r2.measure(y), 2.0 * rho.measure(2.0 * y), rtol=1e-12)
    assert_allclose(2.0 * rho_exact_values(2, 1.0, 2.0 * y), rho_exact_values(2, 0.25, y), rtol=1e-10)


def _abs_normal_mean(c, sd):
    return sd * math.sqrt(2 / math.pi) * math.exp(-c * c / (2 * sd * sd)) + c * (1 - 2 * stats.norm.cdf(-c / sd))


@pytest.mark.parametrize("c", [0.0, 0.7, -1.3])
def test_abs_det_m1_closed_form(c):
    v = 0.5
    est = expected_abs_det_goe(1, v, c)
    assert_allclose(est.value, _abs_normal_mean(c, math.sqrt(2 * v)), rtol=1e-10)
    # shift by u: diagonal entry has variance u + 2v
    s = expected_abs_det_shifted(1, 0.4, v, c)
    assert_allclose(s.value, _abs_normal_mean(c, math.sqrt(0.4 + 2 * v)), rtol=1e-10)


def test_abs_det_goe_vs_mc():
    ens = MatrixEnsemble.goe(2, 1.0)
    c = np.array([0.0, 1.0])
    mc = expected_abs_det_mc(ens, c, 100_000, seed=2)
    ex = expected_abs_det_goe(2, 1.0, c)
    assert np.all(np.abs(mc.value - ex.value) < 4 * mc.std_error)


def test_completed_square_rejects_large_k():
    with pytest.raises(ValueError, match="u < 2v"):
        expected_abs_det_shifted(2, 2.5, 1.0, 0.3, form="completed_square")


@settings(max_examples=6, deadline=None)
@given(st.integers(1, 3), st.floats(0.05, 0.95), st.floats(0.2, 2.0), st.floats(-2.0, 2.0))
def test_shifted_forms_agree(m, k, v, c):
    a = expected_abs_det_shifted(m, 2 * k * v, v, c, form="general").value
    b = expected_abs_det_shifted(m, 2 * k * v, v, c, form="completed_square").value
    assert_allclose(a, b, rtol=1e-8)
