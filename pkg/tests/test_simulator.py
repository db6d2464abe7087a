import csv
import io

import numpy as np
import pytest

from energymix import (BroadcastCost, FiniteMixingDistribution, UnicastCost, make_clique,
                       make_path)
from energymix.broadcast import activation_probabilities, broadcast_distribution
from energymix.convergence import PSchedule, prescribed_learning_rate, t2_min_iterations
from energymix.mixing import ideal_matrix
from energymix.planner import q_bound
from energymix.simulator import (EnergyLedger, SimState, SimTrace, SyntheticProblem,
                                 consensus_distance, dpsgd_step, energy_step, local_gradient,
                                 make_quadratic_problem, max_per_node_energy, run_simulation)


def scalar_problem(b, noise=0.0):
    m = len(b)
    return SyntheticProblem(np.ones((m, 1, 1)), np.asarray(b, float).reshape(m, 1), noise)


def brute_minimum(f, lo, hi, n=200001):
    xs = np.linspace(lo, hi, n)
    vals = [f(np.array([x])) for x in xs]
    k = int(np.argmin(vals))
    return xs[k], vals[k]


def test_two_node_scalar_optimum():
    p = scalar_problem([0.0, 2.0])
    x_bf, f_bf = brute_minimum(p.loss, -3, 5)
    assert p.x_star[0] == pytest.approx(x_bf, abs=1e-4)
    assert p.x_star[0] == pytest.approx(1.0)
    assert p.f_inf == pytest.approx(f_bf, abs=1e-8)
    assert p.f_inf == pytest.approx(0.5)


def test_random_problem_optimum_is_stationary():
    p = make_quadratic_problem(5, 4, 1.0, 0.0, np.random.default_rng(0))
    assert np.allclose(p.full_gradient(p.x_star), 0, atol=1e-10)
    rng = np.random.default_rng(1)
    for _ in range(20):
        assert p.loss(p.x_star + 0.1 * rng.standard_normal(4)) > p.f_inf
    conds = [np.linalg.cond(a) for a in p.A]
    assert max(conds) <= 10


def test_zero_heterogeneity_shares_minimizer():
    p = make_quadratic_problem(4, 3, 0.0, 0.0, np.random.default_rng(2))
    for i in range(4):
        assert np.allclose(p.local_minimizer(i), p.x_star, atol=1e-10)
    assert p.heterogeneity() == pytest.approx(0.0, abs=1e-20)


def test_gradient_at_local_minimizer_is_zero():
    p = make_quadratic_problem(3, 4, 1.0, 0.0, np.random.default_rng(3))
    rng = np.random.default_rng(0)
    for i in range(3):
        assert np.allclose(local_gradient(p, i, p.local_minimizer(i), rng), 0, atol=1e-10)


def test_noiseless_gradient_is_affine():
    p = make_quadratic_problem(3, 4, 1.0, 0.0, np.random.default_rng(4))
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    g = lambda v: local_gradient(p, 1, v, rng)
    assert np.allclose(g(x + y) - g(y), g(x) - g(np.zeros(4)))
    with pytest.raises(ValueError):
        local_gradient(p, 0, np.zeros(5), rng)


def test_noisy_gradient_mean():
    noise, n = 0.7, 100_000
    p = make_quadratic_problem(2, 3, 1.0, noise, np.random.default_rng(5))
    x = np.array([0.3, -0.2, 1.0])
    exact = p.A[0].T @ (p.A[0] @ x - p.b[0])
    rng = np.random.default_rng(6)
    mean = np.mean([local_gradient(p, 0, x, rng) for _ in range(n)], axis=0)
    assert np.all(np.abs(mean - exact) <= 3 * noise / np.sqrt(n))


def test_dpsgd_examples():
    rng = np.random.default_rng(0)
    p = scalar_problem([0.0, 0.0])
    s = SimState(np.array([[0.0], [2.0]]))
    out = dpsgd_step(s, ideal_matrix(2), 0.5, p, rng)
    assert np.allclose(out.x, 0.5) and out.t == 1
    same = dpsgd_step(s, np.eye(2), 0.0, p, rng)
    assert np.array_equal(same.x, s.x)
    with pytest.raises(ValueError):
        dpsgd_step(s, np.eye(3), 0.1, p, rng)
    with pytest.raises(ValueError):
        dpsgd_step(s, np.eye(2), -0.1, p, rng)


def test_ideal_mixing_at_local_minimizers_averages():
    p = scalar_problem([0.0, 1.0, 5.0])
    s = SimState(np.array([[0.0], [1.0], [5.0]]))
    out = dpsgd_step(s, ideal_matrix(3), 0.3, p, np.random.default_rng(0))
    assert np.allclose(out.x, 2.0)


def test_mean_preserved_with_zero_gradients():
    p = make_quadratic_problem(6, 3, 0.0, 0.0, np.random.default_rng(7))
    x = np.tile(p.x_star, (6, 1))
    rng = np.random.default_rng(8)
    d = broadcast_distribution(make_path(6), np.full(6, 0.6))
    s = SimState(x + 0.0)
    for _ in range(20):
        s = dpsgd_step(s, d.sample(rng), 0.2, p, rng)
        assert np.allclose(s.mean, p.x_star, atol=1e-12)
    # noiseless mixing alone keeps the mean too
    s = SimState(rng.standard_normal((6, 3)))
    before = s.mean
    assert np.allclose(dpsgd_step(s, d.sample(rng), 0.0, p, rng).mean, before)


def test_consensus_distance_examples():
    x = np.array([[0.0], [2.0]])
    assert consensus_distance(x) == pytest.approx(1.0)
    assert consensus_distance(SimState(2 * x)) == pytest.approx(4.0)
    assert consensus_distance(np.ones((4, 3))) == 0.0


def test_energy_identity_charges_computation():
    t = make_clique(3)
    c = BroadcastCost([0.1, 0.2, 0.3], [1.0, 1.0, 1.0])
    led = energy_step(EnergyLedger.zeros(3), np.eye(3), c, t)
    assert np.allclose(led.energy, [0.1, 0.2, 0.3])


def test_broadcast_single_indicator():
    t = make_clique(3)
    c = BroadcastCost.homogeneous(3, 0.1, 1.0)
    led = energy_step(EnergyLedger.zeros(3), np.full((3, 3), 1 / 3), c, t)
    assert np.allclose(led.energy, 1.1)


def test_unicast_per_link_sum():
    t = make_path(3)
    c = UnicastCost.from_edges(t, 0.1, {(0, 1): 0.2, (1, 2): 0.3})
    w = np.array([[0.5, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0.5]])
    led = energy_step(EnergyLedger.zeros(3, "unicast"), w, c, t)
    assert np.allclose(led.energy, [0.3, 0.6, 0.4])


def test_energy_mode_mismatch():
    t = make_clique(3)
    with pytest.raises(ValueError):
        energy_step(EnergyLedger.zeros(3, "unicast"), np.eye(3),
                    BroadcastCost.homogeneous(3, 1, 1), t)
    with pytest.raises(ValueError):
        EnergyLedger.zeros(3, "radio")


def test_max_energy_examples():
    assert max_per_node_energy(EnergyLedger(np.full(4, 2.5))) == 2.5
    assert max_per_node_energy(EnergyLedger(np.array([1.0, 7.0, 2.0]))) == 7.0
    assert max_per_node_energy(EnergyLedger(np.zeros(0))) == 0.0


def test_empirical_energy_bound():
    m, T, D = 8, 100, 1.0
    t = make_clique(m)
    c = BroadcastCost.homogeneous(m, 0.2, 1.6)
    d = broadcast_distribution(t, activation_probabilities(c, D))
    maxima = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        led = EnergyLedger.zeros(m)
        for _ in range(T):
            led = energy_step(led, d.sample(rng), c, t)
        maxima.append(max_per_node_energy(led))
    assert np.mean(maxima) <= 1.01 * q_bound(T, D, m)


def test_zero_iterations_records_initial_state():
    p = make_quadratic_problem(3, 2, 1.0, 0.1, np.random.default_rng(0))
    t = make_clique(3)
    c = BroadcastCost.homogeneous(3, 0.1, 0.5)
    tr = run_simulation(p, [(FiniteMixingDistribution.point_mass(np.eye(3)), 0)], 0.1, 0, c, t,
                        np.random.default_rng(1))
    assert len(tr) == 1 and tr.iterations == 0
    assert tr.loss[0] == pytest.approx(p.loss(np.zeros(2)))
    assert np.all(tr.energy[0] == 0)


def test_ideal_schedule_keeps_consensus():
    p = make_quadratic_problem(4, 3, 1.0, 0.0, np.random.default_rng(1))
    t = make_clique(4)
    c = BroadcastCost.homogeneous(4, 0.1, 0.5)
    sched = [(FiniteMixingDistribution.point_mass(ideal_matrix(4)), 1)]
    tr = run_simulation(p, sched, 0.1, 30, c, t, np.random.default_rng(2))
    assert np.allclose(tr.consensus[1:], 0, atol=1e-25)
    assert all(b >= a for a, b in zip(tr.energy[0], tr.energy[-1]))


def test_identity_schedule_plateaus_above_optimum():
    p = make_quadratic_problem(4, 3, 1.0, 0.0, np.random.default_rng(3))
    t = make_clique(4)
    c = BroadcastCost.homogeneous(4, 0.1, 0.5)
    sched = [(FiniteMixingDistribution.point_mass(np.eye(4)), 1)]
    tr = run_simulation(p, sched, 0.3, 3000, c, t, np.random.default_rng(4))
    local_mean = np.mean([p.local_minimizer(i) for i in range(4)], axis=0)
    plateau = p.loss(local_mean) - p.f_inf
    assert plateau > 1e-3
    assert tr.gap()[-1] == pytest.approx(plateau, rel=1e-6)
    assert tr.energy[-1] == pytest.approx(np.full(4, 300.0))


def test_prescribed_rate_converges_within_bound():
    p = make_quadratic_problem(3, 2, 0.0, 0.0, np.random.default_rng(0))
    params = p.convergence_params(1e-3)
    s = PSchedule.constant(1.0)
    T = t2_min_iterations(s, params)
    eta = prescribed_learning_rate(params, T, s)
    t = make_clique(3)
    c = BroadcastCost.homogeneous(3, 0.1, 0.5)
    sched = [(FiniteMixingDistribution.point_mass(ideal_matrix(3)), 1)]
    tr = run_simulation(p, sched, eta, T, c, t, np.random.default_rng(0), stop_gap=1e-3)
    hit = tr.first_hit(1e-3)
    assert hit is not None and hit <= T


def _noisy_run(seed):
    p = make_quadratic_problem(5, 3, 1.0, 0.2, np.random.default_rng(9))
    t = make_clique(5)
    c = BroadcastCost.homogeneous(5, 0.1, 0.5)
    d = broadcast_distribution(t, activation_probabilities(c, 0.35))
    return run_simulation(p, [(d, 20), (broadcast_distribution(t, np.ones(5)), 0)], 0.1, 60, c, t,
                          np.random.default_rng(seed))


def test_determinism():
    a, b = _noisy_run(11), _noisy_run(11)
    assert a.loss == b.loss and a.consensus == b.consensus
    assert all(np.array_equal(x, y) for x, y in zip(a.energy, b.energy))
    assert _noisy_run(12).loss != a.loss


def test_phase_switch_changes_energy_rate():
    tr = _noisy_run(3)
    # after the switch everyone is active every iteration
    step = np.diff(np.array(tr.energy[20:]), axis=0)
    assert np.allclose(step, 0.6)


def test_trace_csv_and_summary(tmp_path):
    tr = _noisy_run(5)
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "loss", "consensus"] + [f"energy_node_{i}" for i in range(5)]
    assert len(rows) == len(tr) + 1
    assert all(len(r) == 8 for r in rows)
    assert float(rows[-1][1]) == tr.loss[-1]
    s = tr.summary(epsilon=1e9)
    assert s["iterations_to_epsilon"] == 0 and s["max_per_node_energy_at_epsilon"] == 0
    assert s["max_per_node_energy"] == tr.max_energy()
    tr.write_summary(tmp_path / "s.json", 1e-3)
    assert (tmp_path / "s.json").read_text().startswith("{")


def test_problem_validation():
    with pytest.raises(ValueError):
        SyntheticProblem(np.ones((2, 1)), np.ones((2, 1)))
    with pytest.raises(ValueError):
        make_quadratic_problem(0, 2, 1, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        make_quadratic_problem(2, 2, -1, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        run_simulation(scalar_problem([0, 1]), [], 0.1, 1, None, make_clique(2),
                       np.random.default_rng(0))
