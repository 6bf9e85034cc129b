import os

import numpy as np
import pytest
from scipy.linalg import eigvalsh

from errors import DomainError, NoCluster
from model import CASE2B, model_rule
from nevanlinna import bottom_energy, find_zero, sector_bottom
from oracle import (adjointness_residual, closed_form_fixtures, compare_counts,
                    eigs_below, elementary_inequality, ess_bottom_estimate,
                    evaluate_fixture, fuzz_elementary_inequality, load_fixtures,
                    oneboson_spectrum, probe_points, symmetry_residual,
                    truncate_full, truncate_hhat, write_fixtures)
from presets import get_preset
from schur import count_below

FIXTURES = os.path.join(os.path.dirname(__file__), os.pardir, "fixtures", "regression.json")


def _unperturbed_spectrum(model, sigma, rule):
    omega = model.omega(rule.nodes)
    i, j = np.triu_indices(rule.size)
    one = omega - sigma * model.epsilon
    two = omega[i] + omega[j] + sigma * model.epsilon
    return np.sort(np.concatenate((one, two)))


@pytest.mark.parametrize("sigma", [1, -1])
def test_uncoupled_truncation_is_diagonal(m1, sigma, small_rule):
    rule = small_rule(m1, 2, 3)
    th = truncate_hhat(m1, sigma, 0.0, rule)
    assert th.size == 6 + 21
    np.testing.assert_allclose(eigvalsh(th.matrix), _unperturbed_spectrum(m1, sigma, rule), atol=1e-14)
    two = th.block("two", "two")
    assert eigvalsh(two).min() >= 2 * m1.m + sigma * m1.epsilon - 1e-10


@pytest.mark.parametrize("name", ["M1", "M3", "MF"])
@pytest.mark.parametrize("sigma", [1, -1])
def test_truncation_is_self_adjoint(name, sigma, small_rule):
    model = get_preset(name)
    rule = small_rule(model, 2, 4)
    for th in (truncate_hhat(model, sigma, 1.0, rule), truncate_full(model, sigma, 1.0, rule)):
        assert adjointness_residual(th) < 1e-13
        assert symmetry_residual(th) == 0.0


def test_two_photon_diagonal(m3, small_rule):
    rule = small_rule(m3, 2, 3)
    th = truncate_hhat(m3, -1, 1.0, rule)
    omega = m3.omega(rule.nodes)
    expected = omega[th.pairs[:, 0]] + omega[th.pairs[:, 1]] - 1.0
    np.testing.assert_allclose(np.diag(th.block("two", "two")), expected)
    np.testing.assert_allclose(np.diag(th.block("one", "one")), omega + 1.0)


@pytest.mark.parametrize("sigma", [1, -1])
def test_vacuum_adds_a_low_rank_perturbation(m1, sigma, small_rule):
    rule = small_rule(m1, 2, 4)
    hat = truncate_hhat(m1, sigma, 1.0, rule)
    full = truncate_full(m1, sigma, 1.0, rule)
    assert full.size == hat.size + 1
    embedded = np.zeros_like(full.matrix)
    embedded[1:, 1:] = hat.matrix
    assert np.linalg.matrix_rank(full.matrix - embedded) <= 2
    assert full.matrix[0, 0] == sigma * m1.epsilon

    z = sector_bottom(m1, sigma, 1.0) - 1e-3
    assert abs(len(eigs_below(full, z)) - len(eigs_below(hat, z))) <= 2


@pytest.mark.parametrize("name", ["M1", "M3"])
@pytest.mark.parametrize("alpha", [0.2, 1.0, 3.0])
@pytest.mark.parametrize("sigma", [1, -1])
def test_schur_counts_agree_with_dense_truncation(name, alpha, sigma, small_rule):
    model = get_preset(name)
    for order in (4, 6):
        table = compare_counts(model, sigma, alpha, small_rule(model, 4, order))
        assert len(table) > 0
        assert table["agree"].all(), table


@pytest.mark.parametrize("sigma", [1, -1])
def test_schur_counts_agree_on_flat_bottom(mf, sigma, small_rule):
    table = compare_counts(mf, sigma, 1.0, small_rule(mf, 2, 4))
    assert table["agree"].all(), table


def test_dense_counts_match_count_below(m1, small_rule):
    rule = small_rule(m1, 3, 5)
    upper = sector_bottom(m1, 1, 3.0) - 1e-3
    eigs = eigs_below(truncate_hhat(m1, 1, 3.0, rule), upper)
    for z in probe_points(eigs, upper - 3.0, upper, 6):
        assert count_below(m1, 1, 3.0, z, rule) == int(np.searchsorted(eigs, z))


def test_probe_points_avoid_eigenvalues():
    eigs = [-1.5, -1.25]
    points = probe_points(eigs, -2.0, -1.0, 5)
    assert len(points) == 5
    assert all(-2.0 < z < -1.0 for z in points)
    assert min(abs(z - e) for z in points for e in eigs) > 1e-6
    with pytest.raises(DomainError):
        probe_points(eigs, -1.0, -2.0, 5)


@pytest.mark.slow
@pytest.mark.parametrize("name, panels", [("M1", 5), ("MF", 2)])
def test_ess_bottom_estimate(name, panels):
    model = get_preset(name)
    rules = [model_rule(model, panels, order) for order in (4, 8, 16)]
    estimate = ess_bottom_estimate(model, 1, 1.0, rules)
    assert abs(estimate - sector_bottom(model, 1, 1.0)) < 1e-2


def test_ess_bottom_estimate_needs_refinement(m1, small_rule):
    with pytest.raises(NoCluster):
        ess_bottom_estimate(m1, 1, 1.0, [small_rule(m1)])


@pytest.mark.parametrize("name", ["M1", "M3", "MF", "MR"])
@pytest.mark.parametrize("alpha", [0.1, 1.0])
def test_oneboson_spectrum(name, alpha):
    model = get_preset(name)
    result = oneboson_spectrum(model, alpha)
    assert result["ess_bottom"] == model.m - model.epsilon
    assert result["ground_state"] == bottom_energy(model, alpha)[0]
    assert abs(result["truncated_ground_state"] - result["ground_state"]) < 1e-8
    expected = 1 if result["regime"] == CASE2B else 2
    assert len(result["eigenvalues"]) == expected
    assert all(e < result["ess_bottom"] + 2 * model.epsilon for e in result["eigenvalues"])

    assert [entry["eigenvalue"] for entry in result["matched"]] == result["eigenvalues"]
    resolved = [entry for entry in result["matched"] if entry["truncated"] is not None]
    unresolved = [entry["phi_sigma"] for entry in result["matched"] if entry["truncated"] is None]
    assert result["truncated_eigenvalues"] == sorted(entry["truncated"] for entry in resolved)
    assert all(entry["difference"] < 1e-8 for entry in resolved)
    if (name, alpha) == ("M1", 0.1):
        # E_{-eps} sits about e^-100 below m - eps, clamped at the boundary gap
        assert unresolved == ["-"]
    else:
        assert unresolved == []
        assert len(result["truncated_eigenvalues"]) == len(result["eigenvalues"])


def test_oneboson_drops_level_set_copies_of_thresholds(mf):
    result = oneboson_spectrum(mf, 0.1)
    assert len(result["truncated_eigenvalues"]) == 2
    assert all(e < -1.0 - 1e-3 for e in result["truncated_eigenvalues"])


def test_oneboson_subcritical(m3):
    result = oneboson_spectrum(m3, 0.3)
    assert result["regime"] == CASE2B
    assert result["eigenvalues"] == [find_zero(m3, 1, 0.3)]


@pytest.mark.parametrize("a, b, c", [(0.0, 0.0, 1.0), (1.0, 1.0, 1.0), (1e-6, 1e6, 1e-3), (2.0, 0.0, 0.5)])
def test_elementary_inequality_examples(a, b, c):
    lhs, upper, ok = elementary_inequality(a, b, c)
    assert ok
    assert lhs >= -1e-12 / c
    assert isinstance(lhs, float)


def test_elementary_inequality_equal_arguments():
    lhs, upper, ok = elementary_inequality(1.0, 1.0, 1.0)
    assert lhs == pytest.approx(1 / 3)
    assert upper == 0.5
    assert ok


def test_elementary_inequality_rejects_invalid_arguments():
    with pytest.raises(DomainError):
        elementary_inequality(-1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        elementary_inequality(1.0, 1.0, 0.0)


def test_fuzz_elementary_inequality():
    summary = fuzz_elementary_inequality(100000, seed=7)
    assert summary["violations"] == 0
    assert summary["passed"]
    assert summary["count"] == 100000
    assert fuzz_elementary_inequality(1000, seed=7) == fuzz_elementary_inequality(1000, seed=7)


def test_regression_fixtures():
    fixtures = load_fixtures(FIXTURES)
    assert len(fixtures) == len(closed_form_fixtures())
    for entry in fixtures:
        assert abs(evaluate_fixture(entry) - entry["value"]) <= entry["tolerance"], entry


def test_written_fixtures_reload(tmp_path):
    path = tmp_path / "fixtures.json"
    write_fixtures(str(path))
    reloaded = load_fixtures(str(path))
    assert [entry["quantity"] for entry in reloaded] == [entry["quantity"] for entry in closed_form_fixtures()]
    for entry, expected in zip(reloaded, load_fixtures(FIXTURES)):
        assert entry["value"] == pytest.approx(expected["value"], rel=1e-14, abs=1e-15)


@pytest.mark.slow
@pytest.mark.parametrize("sigma", [1, -1])
def test_schur_counts_agree_on_hundred_node_rule(m1, sigma):
    table = compare_counts(m1, sigma, 1.0, model_rule(m1, 5, 20))
    assert table["agree"].all(), table
