import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from critlab.gaussian_core import Grid
from critlab.spectral_constants import omega_params
from critlab.torus_field_lab import (
    TorusField,
    build_spectrum,
    covariance_report,
    default_grid_n,
    empirical_complexity,
    eval_field,
    feature_matrix,
    find_critical_points,
    joint_gaussian,
    kac_rice_density,
    kac_rice_total,
    sample_field,
)

SP = build_spectrum(2, 20.0)


@pytest.mark.parametrize("L,dim", [(10, 9), (15, 21), (20, 37), (30, 69)])
def test_dimension_counts(L, dim):
    assert build_spectrum(2, L).dim == dim


def test_spectrum_pairs_are_distinct():
    k = SP.frequencies
    keys = {tuple(v) for v in k} | {tuple(-v) for v in k}
    assert len(keys) == 2 * len(k)
    assert np.all(SP.eigenvalues <= 20.0**2 + 1e-9)


def test_rejects_unsupported_dimension():
    with pytest.raises(ValueError, match="m in"):
        build_spectrum(1, 10.0)
    with pytest.raises(ValueError, match="cap"):
        build_spectrum(3, 400.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.integers(-5, 5), min_size=2, max_size=2))
def test_periodicity(seed, shift):
    f = sample_field(SP, 0.3, seed)
    p = np.random.default_rng(seed).random(2)
    a = eval_field(f, p)
    b = eval_field(f, p + np.array(shift, float))
    assert abs(a[0] - b[0]) <= 1e-12 * max(1, abs(a[0]))
    assert_allclose(a[1], b[1], atol=1e-12 * 20)
    assert_allclose(a[2], b[2], atol=1e-12 * 400)


def test_finite_differences():
    f = sample_field(SP, 0.0, 7)
    p = np.array([0.31, 0.77])
    u, g, H = eval_field(f, p)
    h = 1e-5
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        up, gp, _ = eval_field(f, p + e)
        um, gm, _ = eval_field(f, p - e)
        assert abs((up - um) / (2 * h) - g[i]) <= 1e-7 * np.abs(g).max()
        assert_allclose((gp - gm) / (2 * h), H[:, i], rtol=0, atol=1e-5 * np.abs(H).max())


def test_vectorised_eval_matches_pointwise():
    f = sample_field(SP, 0.0, 1)
    pts = np.random.default_rng(0).random((5, 2))
    u, g, H = eval_field(f, pts)
    for i, p in enumerate(pts):
        ui, gi, Hi = eval_field(f, p)
        assert_allclose(u[i], ui)
        assert_allclose(g[i], gi)
        assert_allclose(H[i], Hi)


def test_joint_gaussian_matches_samples():
    sp = build_spectrum(2, 10.0)
    joint = joint_gaussian(sp, 0.5)
    feats = []
    for s in range(4000):
        f = sample_field(sp, 0.5, s)
        u, g, H = eval_field(f, np.zeros(2))
        feats.append([u, *g, H[0, 0], H[0, 1], H[1, 1]])
    emp = np.cov(np.array(feats).T)
    assert_allclose(emp, joint.cov, atol=0.08 * np.abs(joint.cov).max())


def test_feature_matrix_is_point_independent_in_covariance():
    F0, _ = feature_matrix(SP)
    F1, _ = feature_matrix(SP, np.array([0.123, 0.456]))
    assert_allclose(F0.T @ F0, F1.T @ F1, rtol=1e-10, atol=1e-6)


def test_covariance_report_trend_and_zeros():
    errs = []
    for L in (20, 40, 80):
        rep = covariance_report(build_spectrum(2, L))
        assert all(v == 0.0 for v in rep["zeros"].values())
        errs.append(rep["max_ratio_error"])
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.05


def test_single_mode_field_is_not_morse():
    sp = build_spectrum(2, 7.0)
    coeffs = np.zeros(sp.dim)
    coeffs[1] = 1.0  # one cosine mode: critical set is a union of circles
    cp = find_critical_points(TorusField(sp, coeffs))
    assert not cp.morse


def test_critical_points_are_critical_and_euler_zero():
    f = sample_field(SP, 0.0, 3)
    cp = find_critical_points(f)
    assert cp.morse and len(cp) > 0
    assert cp.euler_sum == 0
    for rec in cp:
        u, g, H = eval_field(f, rec.location)
        assert np.abs(g).max() <= 1e-9
        assert rec.morse_index == int(np.sum(np.linalg.eigvalsh(H) < 0))
        assert_allclose(u, rec.value)


def test_grid_refinement_finds_same_points():
    f = sample_field(SP, 0.0, 11)
    n = default_grid_n(SP)
    assert len(find_critical_points(f, n)) == len(find_critical_points(f, 2 * n))


def test_kac_rice_matches_empirical_small():
    sp = build_spectrum(2, 10.0)
    omega = omega_params(2, 10.0, 1.0).omega
    kr, kr_se = kac_rice_total(sp, omega, 200_000, seed=1)
    emp = empirical_complexity(sp, omega, 150, seed=2)
    assert np.all(emp.euler_sums == 0)
    assert abs(kr - emp.mean_count) <= 3 * math.hypot(kr_se, emp.std_error)


def test_kac_rice_density_integrates_to_total():
    sp = build_spectrum(2, 10.0)
    omega = omega_params(2, 10.0, 1.0).omega
    sd = math.sqrt(joint_gaussian(sp, omega).cov[0, 0])
    dens = kac_rice_density(sp, omega, Grid(-8 * sd, 8 * sd, 401), 40_000, seed=3)
    kr, kr_se = kac_rice_total(sp, omega, 40_000, seed=3)
    assert abs(dens.mass - kr) < 5 * kr_se


def test_empirical_complexity_deterministic():
    sp = build_spectrum(2, 10.0)
    a = empirical_complexity(sp, 0.1, 6, seed=5, threads=1)
    b = empirical_complexity(sp, 0.1, 6, seed=5, threads=3)
    assert a.rows == b.rows
