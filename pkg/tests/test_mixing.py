import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from energymix.broadcast import broadcast_distribution
from energymix.mixing import (FiniteMixingDistribution, ideal_matrix, matrix_from_json,
                              matrix_to_json, metropolis_weights, rho_exact, rho_monte_carlo,
                              validate_mixing)
from energymix.topology import Topology, make_clique, make_path
from oracles import metropolis


def test_identity_valid_everywhere():
    for t in (make_clique(4), make_path(4), Topology(3, frozenset())):
        assert validate_mixing(np.eye(t.m), t).valid


def test_ideal_valid_on_clique():
    assert validate_mixing(ideal_matrix(5), make_clique(5)).valid


def test_ideal_on_path_reports_missing_edge():
    rep = validate_mixing(ideal_matrix(3), make_path(3))
    assert not rep.valid
    assert any("(0,2)" in e for e in rep.errors)


def test_validate_reports_asymmetry_and_row_sums():
    w = np.array([[0.5, 0.5], [0.4, 0.5]])
    rep = validate_mixing(w, make_clique(2))
    assert any("asymmetric" in e for e in rep.errors)
    assert any("row 1" in e for e in rep.errors)


def test_negative_entries_are_only_a_warning():
    w = np.array([[1.2, -0.2], [-0.2, 1.2]])
    rep = validate_mixing(w, make_clique(2))
    assert rep.valid and rep.warnings


def test_validate_dimension_mismatch():
    with pytest.raises(ValueError):
        validate_mixing(np.eye(3), make_clique(2))


def test_metropolis_examples():
    assert np.allclose(metropolis_weights(make_clique(3), {0, 1, 2}), np.full((3, 3), 1 / 3))
    assert np.allclose(metropolis_weights(make_clique(3), {0}), np.eye(3))
    w = metropolis_weights(make_path(3), {0, 1})
    assert np.allclose(w, [[0.5, 0.5, 0], [0.5, 0.5, 0], [0, 0, 1]])


def test_rho_exact_examples():
    assert rho_exact(FiniteMixingDistribution.point_mass(ideal_matrix(4))) == pytest.approx(0, abs=1e-12)
    assert rho_exact(FiniteMixingDistribution.point_mass(np.eye(3))) == pytest.approx(1)
    d = FiniteMixingDistribution([np.eye(2), ideal_matrix(2)], [0.75, 0.25])
    assert rho_exact(d) == pytest.approx(0.75)


def test_rho_exact_rejects_sampled():
    with pytest.raises(TypeError):
        rho_exact(broadcast_distribution(make_clique(2), [0.5, 0.5]))


def test_distribution_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        FiniteMixingDistribution([np.eye(2)], [0.9])


def test_monte_carlo_point_mass_at_ideal():
    est, se = rho_monte_carlo(FiniteMixingDistribution.point_mass(ideal_matrix(3)), 10, seed=1)
    assert est == pytest.approx(0, abs=1e-12) and se == pytest.approx(0, abs=1e-12)


def test_monte_carlo_two_node_broadcast():
    est, se = rho_monte_carlo(broadcast_distribution(make_clique(2), [0.5, 0.5]), 100_000, seed=7)
    assert abs(est - 0.75) <= 0.01
    assert se <= 0.01


def test_monte_carlo_deterministic():
    d = broadcast_distribution(make_clique(4), [0.3] * 4)
    assert rho_monte_carlo(d, 500, seed=3) == rho_monte_carlo(d, 500, seed=3)


def test_monte_carlo_needs_two_samples():
    with pytest.raises(ValueError):
        rho_monte_carlo(FiniteMixingDistribution.point_mass(np.eye(2)), 1, seed=0)


def test_monte_carlo_brackets_exact_on_finite_support():
    rng = np.random.default_rng(0)
    t = make_clique(4)
    mats = [metropolis_weights(t, set(np.flatnonzero(rng.random(4) < 0.5))) for _ in range(6)]
    d = FiniteMixingDistribution(mats, np.full(6, 1 / 6))
    exact = rho_exact(d)
    hits = 0
    for seed in range(40):
        est, se = rho_monte_carlo(d, 2000, seed=seed)
        hits += abs(est - exact) <= 3 * se + 1e-12
    assert hits >= 38


def test_json_round_trips():
    d = FiniteMixingDistribution([np.eye(2), ideal_matrix(2)], [0.25, 0.75])
    back = FiniteMixingDistribution.from_json(d.to_json())
    assert np.allclose(back.gram(), d.gram())
    w = metropolis_weights(make_path(3), {0, 1})
    assert np.array_equal(matrix_from_json(matrix_to_json(w)), w)


@st.composite
def graph_and_active(draw):
    m = draw(st.integers(1, 9))
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    active = draw(st.sets(st.integers(0, m - 1)))
    return Topology(m, frozenset(chosen)), active


@settings(max_examples=80, deadline=None)
@given(graph_and_active())
def test_metropolis_always_valid_and_matches_oracle(case):
    t, active = case
    w = metropolis_weights(t, active)
    assert validate_mixing(w, t).valid
    assert np.all(np.diag(w) >= -1e-15)
    assert np.allclose(w, metropolis([set(a) for a in t.adjacency], sorted(active)))
    # J W = J for any symmetric row-stochastic W
    assert np.allclose(ideal_matrix(t.m) @ w, ideal_matrix(t.m))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_rho_exact_nonnegative(m, seed):
    rng = np.random.default_rng(seed)
    t = make_clique(m)
    k = int(rng.integers(1, 5))
    mats = [metropolis_weights(t, set(np.flatnonzero(rng.random(m) < 0.5))) for _ in range(k)]
    p = rng.dirichlet(np.ones(k))
    assert rho_exact(FiniteMixingDistribution(mats, p)) >= 0
