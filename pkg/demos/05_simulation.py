"""
D-PSGD with energy accounting
=============================

Quadratic local objectives stand in for training. Each run stops once the
average model is within epsilon of the optimum and reports the largest
per-node energy spent up to that point.
"""

import numpy as np

from energymix import BroadcastCost, FiniteMixingDistribution, make_clique
from energymix.broadcast import activation_probabilities, broadcast_distribution
from energymix.mixing import ideal_matrix
from energymix.simulator import make_quadratic_problem, run_simulation

m, eps, eta = 33, 1e-3, 0.1
t = make_clique(m)
c = BroadcastCost.homogeneous(m, 0.086, 0.533)
problem = make_quadratic_problem(m, 20, 1.0, 0.1, np.random.default_rng(0))
print(f"F_inf={problem.f_inf:.4f}, heterogeneity={problem.heterogeneity():.3f}")

full = [(FiniteMixingDistribution.point_mass(ideal_matrix(m)), 1)]


def energy_to_eps(schedule, seeds=range(5)):
    hits, energy = [], []
    for s in seeds:
        tr = run_simulation(problem, schedule, eta, 5000, c, t, np.random.default_rng(s),
                            stop_gap=eps)
        k = tr.first_hit(eps)
        if k is None:
            return None, None
        hits.append(k)
        energy.append(tr.max_energy(k))
    return np.mean(hits), np.mean(energy)


it, e = energy_to_eps(full)
print(f"full activation: {it:.0f} iterations, max node energy {e:.2f}")
for D in (0.2, 0.3, 0.45, 0.6):
    sched = [(broadcast_distribution(t, activation_probabilities(c, D)), 1)]
    it, e = energy_to_eps(sched)
    if it is None:
        print(f"budget D={D:.2f}:  epsilon not reached in 5000 iterations")
    else:
        print(f"budget D={D:.2f}:  {it:.0f} iterations, max node energy {e:.2f}")

# Sparse first, dense later.
sparse = broadcast_distribution(t, activation_probabilities(c, 0.3))
for tau in (10, 30, 60):
    it, e = energy_to_eps([(sparse, tau), full[0]])
    print(f"D=0.3 for {tau:>2} iterations then full: {it:.0f} iterations, energy {e:.2f}")

trace = run_simulation(problem, full, eta, 200, c, t, np.random.default_rng(0))
trace.write_csv("trace_full.csv")
print("wrote trace_full.csv")
