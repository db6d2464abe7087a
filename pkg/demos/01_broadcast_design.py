"""
Broadcast activation under an energy budget
===========================================

Each node pays a computation cost every iteration and a transmission cost
only when it talks. Under a per-node budget D the design activates node i
with probability omega_i = min((D - comp_i) / tx_i, 1) and mixes the active
nodes with Metropolis weights.
"""

import numpy as np

from energymix import (BroadcastCost, make_clique, jetson_device_costs, rho_monte_carlo,
                       roofnet_surrogate)
from energymix.broadcast import (activation_probabilities, broadcast_distribution, m_perp,
                                 rho_asymptotic_clique, rho_homogeneous_clique)

# A 100-node clique with homogeneous costs has a closed form: rho = 1 - omega.
m = 100
t = make_clique(m)
c = BroadcastCost.homogeneous(m, 1.0, 2.0)
print("homogeneous clique, comp=1, tx=2")
for D in (1.25, 1.5, 2.0, 2.5):
    omega = activation_probabilities(c, D)
    est, se = rho_monte_carlo(broadcast_distribution(t, omega), 1000, seed=0)
    print(f"  D={D:4.2f}  omega={omega[0]:.3f}  closed form={rho_homogeneous_clique(1, 2, D):.3f}"
          f"  sampled={est:.3f} +- {se:.3f}")

# Mixed hardware: alternating cheap and expensive radios.
c = jetson_device_costs(m)
omega = activation_probabilities(c, 0.6)
print("\nalternating device costs at D=0.6")
print("  activation probabilities:", np.unique(omega.round(3)))
print(f"  m_perp={m_perp(omega):.2f}  asymptotic rho={rho_asymptotic_clique(omega):.3f}")

# The same budget on a sparse mesh mixes far more slowly.
mesh = roofnet_surrogate(0)
cm = jetson_device_costs(mesh.m)
for D in (0.4, 0.8, 1.2):
    est, se = rho_monte_carlo(broadcast_distribution(mesh, activation_probabilities(cm, D)),
                              1000, seed=1)
    print(f"  mesh ({mesh.m} nodes, {mesh.n_edges} links) D={D}: rho={est:.3f}")
