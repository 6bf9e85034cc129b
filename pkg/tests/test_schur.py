import math

import numpy as np
import pytest

from errors import DomainError
from model import lambda_norm_sq, model_rule
from nevanlinna import essential_spectrum, find_zero, phi, sector_bottom
from oracle import eigs_below, elementary_inequality, truncate_hhat
from presets import get_preset
from quad import build_rule
from schur import (FULL_K, K2_ONLY, birman_schwinger_T, birman_schwinger_count,
                   count_below, delta_diag, delta_factored, delta_values,
                   discrete_eigenvalues, full_count_bound_check, kernel_K,
                   schur_complement, split_K)


def _offset(model, sigma, z):
    return 2 * model.m + sigma * model.epsilon - z


def _bottom(model, sigma, alpha):
    return model.m + find_zero(model, sigma, alpha)


def test_delta_without_coupling(m1):
    rule = model_rule(m1)
    values = delta_values(m1, 1, 0.0, -2.0, rule.nodes, rule)
    np.testing.assert_allclose(values, rule.nodes + 1.0, rtol=1e-14)
    np.testing.assert_allclose(np.diag(delta_diag(m1, 1, 0.0, -2.0, rule).matrix), values)


def test_delta_closed_form(m1):
    expected = 2.0 - 2.0 * math.log(1.25)
    assert abs(delta_values(m1, 1, 1.0, -2.0, [1.0])[0] - expected) < 1e-10
    assert abs(delta_values(m1, 1, 1.0, -2.0, [1.0], model_rule(m1))[0] - expected) < 1e-10


@pytest.mark.parametrize("name, sigma, alpha", [("M1", 1, 1.0), ("M3", -1, 1.0), ("MF", 1, 0.5)])
def test_delta_bounded_below_by_phi_at_mass(name, sigma, alpha):
    model = get_preset(name)
    rule = model_rule(model)
    z = _bottom(model, sigma, alpha) - 0.1
    values = delta_values(model, sigma, alpha, z, rule.nodes, rule)
    assert values.min() >= phi(model, sigma, alpha, z - model.m, rule=rule)
    assert values.min() > 0


def test_delta_rejects_energies_above_two_photon_threshold(m1):
    with pytest.raises(DomainError):
        delta_values(m1, 1, 1.0, 1.0, [0.5])
    with pytest.raises(DomainError):
        kernel_K(m1, -1, 1.0, -1.0, model_rule(m1))


@pytest.mark.parametrize("name", ["M1", "M3", "MF", "MR"])
@pytest.mark.parametrize("sigma", [1, -1])
def test_kernel_symmetry_and_frobenius_bound(name, sigma):
    model = get_preset(name)
    rule = model_rule(model)
    z = 2 * model.m + sigma * model.epsilon - 0.25
    K = kernel_K(model, sigma, 1.0, z, rule)
    assert K.symmetry_residual() == 0.0
    assert K.frobenius_norm <= lambda_norm_sq(model) / _offset(model, sigma, z) * (1 + 1e-10)


def test_kernel_vanishes_outside_support(m1):
    rule = build_rule(2.0, 4, 8)
    K = kernel_K(m1, 1, 1.0, -2.0, rule).matrix
    outside = rule.nodes > 1.0
    assert outside.any()
    assert np.all(K[outside] == 0.0)


@pytest.mark.parametrize("name, sigma, z", [("M1", 1, -2.0), ("M3", -1, -1.5), ("MF", 1, -1.0)])
def test_split_kernel(name, sigma, z):
    model = get_preset(name)
    rule = model_rule(model)
    K = kernel_K(model, sigma, 1.0, z, rule).matrix
    K1, K2 = (part.matrix for part in split_K(model, sigma, 1.0, z, rule))
    np.testing.assert_allclose(K1 + K2, K, atol=1e-14 * np.abs(K).max())

    singular = np.linalg.svd(K1, compute_uv=False)
    assert singular[2] < 1e-12 * singular[0]

    c = _offset(model, sigma, z)
    s = rule.sqrt_weights * model.coupling(rule.nodes)
    a = model.excess(rule.nodes)
    bound = np.outer(s, s) * np.sqrt(np.outer(a, a)) / (2 * c ** 2)
    assert np.all(K2 >= 0)
    assert np.all(K2 <= bound * (1 + 1e-12))
    _, _, ok = elementary_inequality(a[:, None], a[None, :], c)
    assert ok.all()


def test_flat_bottom_remainder_vanishes_on_level_set(mf):
    rule = model_rule(mf)
    _, K2 = split_K(mf, 1, 1.0, -1.0, rule)
    flat = rule.nodes < 1.0
    assert flat.sum() == rule.size // 2
    assert np.all(K2.matrix[flat] == 0.0)
    assert np.all(K2.matrix[:, flat] == 0.0)


def test_schur_complement_without_coupling(m3):
    rule = model_rule(m3)
    S = schur_complement(m3, 1, 0.0, -1.5, rule)
    np.testing.assert_allclose(S, np.diag(rule.nodes + 0.5), rtol=1e-14)


def test_factored_delta_matches_direct_evaluation(m3):
    rule = model_rule(m3)
    z0 = _bottom(m3, 1, 1.0)
    direct = delta_values(m3, 1, 1.0, z0, rule.nodes, rule)
    factored = delta_factored(m3, 1, 1.0, z0, rule.nodes, rule)
    np.testing.assert_allclose(factored, direct, atol=1e-9)
    assert np.all(factored > 0)


@pytest.mark.parametrize("name, sigma, alpha", [("M1", 1, 1.0), ("M3", 1, 1.0), ("M3", -1, 2.0)])
def test_boundary_kernel_bound(name, sigma, alpha):
    model = get_preset(name)
    rule = model_rule(model)
    z0 = _bottom(model, sigma, alpha)
    T = birman_schwinger_T(model, sigma, alpha, z0, rule, K2_ONLY)
    c = _offset(model, sigma, z0)
    assert np.all(np.isfinite(T.matrix))
    assert T.symmetry_residual() < 1e-14 * max(1.0, np.abs(T.matrix).max())
    assert T.frobenius_norm <= lambda_norm_sq(model) / (2 * c ** 2) * (1 + 1e-10)


def test_boundary_operator_drops_level_set(mf):
    rule = model_rule(mf)
    z0 = _bottom(mf, 1, 1.0)
    T = birman_schwinger_T(mf, 1, 1.0, z0, rule, K2_ONLY)
    assert np.all(rule.nodes[T.indices] > 1.0)
    assert T.matrix.shape == (T.indices.size, T.indices.size)


@pytest.mark.parametrize("name, sigma", [("M1", 1), ("M3", 1), ("MF", 1)])
def test_k2_operator_is_left_continuous(name, sigma):
    model = get_preset(name)
    rule = model_rule(model)
    z0 = _bottom(model, sigma, 1.0)
    at_bottom = birman_schwinger_T(model, sigma, 1.0, z0, rule, K2_ONLY).matrix
    distances = [
        np.linalg.norm(birman_schwinger_T(model, sigma, 1.0, z0 - 10.0 ** -k, rule, K2_ONLY).matrix - at_bottom)
        for k in range(2, 7)
    ]
    assert np.all(np.diff(distances) < 0)
    assert distances[-1] < 1e-3


def test_birman_schwinger_mode_errors(m3):
    rule = model_rule(m3)
    with pytest.raises(DomainError):
        birman_schwinger_T(m3, 1, 1.0, -3.0, rule, "K1-only")
    with pytest.raises(DomainError):
        birman_schwinger_T(m3, -1, 0.3, -1.5, rule, K2_ONLY)
    with pytest.raises(DomainError):
        birman_schwinger_T(m3, 1, 1.0, _bottom(m3, 1, 1.0) + 0.01, rule, FULL_K)


@pytest.mark.parametrize("name, sigma, alpha", [
    ("M1", 1, 1.0), ("M1", 1, 3.0), ("M1", -1, 2.0), ("M3", -1, 1.0), ("M3", 1, 3.0),
])
def test_birman_schwinger_count_matches_schur_count(name, sigma, alpha):
    model = get_preset(name)
    rule = model_rule(model)
    bottom = sector_bottom(model, sigma, alpha)
    for z in (bottom - 0.5, bottom - 1e-2, bottom - 1e-3):
        assert birman_schwinger_count(model, sigma, alpha, z, rule) == count_below(model, sigma, alpha, z, rule)


def test_no_eigenvalues_at_vanishing_coupling(m1, m3):
    for model in (m1, m3):
        rule = model_rule(model)
        assert count_below(model, 1, 1e-6, model.m - model.epsilon - 0.1, rule) == 0
        assert count_below(model, -1, 1e-6, 2 * model.m - model.epsilon - 0.1, rule) == 0


@pytest.mark.parametrize("name, sigma, alpha", [("M1", 1, 3.0), ("M3", -1, 2.0), ("MR", 1, 1.0)])
def test_count_is_monotone_in_z(name, sigma, alpha):
    model = get_preset(name)
    rule = model_rule(model)
    bottom = sector_bottom(model, sigma, alpha)
    counts = [count_below(model, sigma, alpha, z, rule) for z in bottom - np.array([5.0, 2.0, 1.0, 0.1, 1e-3])]
    assert counts == sorted(counts)


def test_count_rejects_energies_in_essential_spectrum(m1):
    rule = model_rule(m1)
    bottom = sector_bottom(m1, 1, 1.0)
    with pytest.raises(DomainError):
        count_below(m1, 1, 1.0, bottom, rule)


@pytest.mark.parametrize("name, sigma, alpha", [("M1", 1, 1.0), ("M1", -1, 1.0), ("M3", 1, 1.0)])
def test_count_is_stable_under_refinement(name, sigma, alpha):
    model = get_preset(name)
    z = sector_bottom(model, sigma, alpha) - 1e-3
    counts = {count_below(model, sigma, alpha, z, model_rule(model, 10, order)) for order in (10, 20, 40)}
    assert len(counts) == 1


@pytest.mark.parametrize("name, sigma, alpha", [("M1", 1, 3.0), ("M3", -1, 2.0)])
def test_discrete_eigenvalues_match_dense_truncation(name, sigma, alpha, small_rule):
    model = get_preset(name)
    rule = small_rule(model, 3, 6)
    upper = sector_bottom(model, sigma, alpha) - 1e-3
    found = discrete_eigenvalues(model, sigma, alpha, rule, gap=1e-3)
    expected = eigs_below(truncate_hhat(model, sigma, alpha, rule), upper)
    assert len(found) == len(expected) == count_below(model, sigma, alpha, upper, rule)
    np.testing.assert_allclose(found, expected, atol=1e-7)


def test_discrete_eigenvalues_need_positive_gap(m1):
    with pytest.raises(DomainError):
        discrete_eigenvalues(m1, 1, 1.0, model_rule(m1), gap=0.0)


@pytest.mark.parametrize("name, alpha", [("M1", 1.0), ("M3", 2.0), ("MF", 0.5)])
def test_full_count_bound(name, alpha, small_rule):
    model = get_preset(name)
    rule = small_rule(model, 2, 4)
    z = essential_spectrum(model, alpha).bottom - 1e-3
    assert full_count_bound_check(model, alpha, z, rule)


def test_full_kernel_at_bottom_uses_factored_delta(m3):
    rule = model_rule(m3)
    z0 = _bottom(m3, 1, 1.0)
    T = birman_schwinger_T(m3, 1, 1.0, z0, rule, FULL_K)
    assert T.z == z0
    assert T.indices.size == rule.size
    assert np.all(np.isfinite(T.matrix))
    assert T.symmetry_residual() < 1e-14 * np.abs(T.matrix).max()
