"""
Choosing budgets and switch points
==================================

The planner works on a calibrated profile rho_plus(D) and the energy bound
q(T, D) = D (T + m sqrt(T pi / 8)). A single-phase plan picks the D with the
smallest q at its horizon; a two-phase plan adds a switch point tau1.
"""

from energymix import BroadcastCost, make_clique, jetson_device_costs, roofnet_surrogate
from energymix.planner import (calibrate_rho_profile, default_budget_grid, plan_multi_phase,
                               q_k1_objective)
from energymix.simulator import make_quadratic_problem

import numpy as np

m = 33
t = make_clique(m)
c = BroadcastCost.homogeneous(m, 0.086, 0.533)
profile = calibrate_rho_profile("broadcast", t, c, default_budget_grid("broadcast", t, c, 13))
problem = make_quadratic_problem(m, 20, 1.0, 0.1, np.random.default_rng(0))
params = problem.convergence_params(1e-3)
print("bound constants:", params)

print("\nsingle phase objective across the budget window")
for D in profile.budgets[1::3]:
    print(f"  D={D:.3f}  rho+={profile.rho_at(D):.3f}  Q1={q_k1_objective(D, profile, params):.3e}")

for K in (1, 2):
    plan = plan_multi_phase(K, profile, params)
    print(f"\nbest plan with up to {K} phase(s): K={plan.K} objective={plan.objective:.3e}")
    for ph in plan.phases:
        print(f"  D={ph.budget:.3f} tau={ph.duration} p={ph.p:.3f}")

# With a linear profile 2/p(D) is convex in D, so mixing a sparse and a dense
# phase never beats one phase at the average budget. Forcing two phases
# shows what the search settles on.
forced = plan_multi_phase(2, profile, params, min_phases=2)
print("\nforced two-phase plan:", [(round(p.budget, 3), p.duration) for p in forced.phases])

# On a mesh the profile comes from sampling.
mesh = roofnet_surrogate(0)
cm = jetson_device_costs(mesh.m)
prof = calibrate_rho_profile("broadcast", mesh, cm, default_budget_grid("broadcast", mesh, cm, 6),
                             n=300, rng=np.random.default_rng(0))
print("\nmesh profile:", [(round(b, 3), round(r, 3)) for b, r in zip(prof.budgets, prof.rho_upper)])
