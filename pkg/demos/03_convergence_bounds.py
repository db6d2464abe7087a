"""
Iterations needed for a schedule of divergences
===============================================

p = 1 - rho measures how much a mixing step contracts disagreement. For a
time-varying p the bound works through the aggregates Pi1 and Pi2, and the
smallest T satisfying the convergence condition is found by search.
"""

from energymix import ConvergenceParams, PSchedule
from energymix.convergence import (pi_aggregates, pi_aggregates_two_phase,
                                   prescribed_learning_rate, t2_min_iterations, t3_phase_horizon)

# Constant p gives Pi1 = 2/p and Pi2 = 2/p^2.
for p in (1.0, 0.5, 0.1):
    print(f"p={p}: Pi1, Pi2 = {pi_aggregates(PSchedule.constant(p), 1000)}")

# A short fully-connected phase followed by p=0.5.
print("two phase (p1=1, tau1=1, p2=0.5, T=2):", pi_aggregates_two_phase(1.0, 1, 0.5, 2))

clean = ConvergenceParams(L=1, epsilon=0.01, r0=1, convex=True)
print("\nclean convex problem, p=0.5 -> T2 =", t2_min_iterations(PSchedule.constant(0.5), clean))

noisy = ConvergenceParams(L=1, epsilon=0.05, r0=1, sigma_hat=0.5, zeta_hat=0.5, xi0=1.0, m=20,
                          convex=True)
for p in (1.0, 0.6, 0.3, 0.1):
    T = t2_min_iterations(PSchedule.constant(p), noisy)
    eta = prescribed_learning_rate(noisy, T, PSchedule.constant(p))
    print(f"noisy problem, p={p}: T2={T:>9d}  eta={eta:.2e}")

# Spending the first iterations at p=1 buys less than one might hope.
print("dense start then p=0.3:", t3_phase_horizon([(1.0, 100)], 0.3, noisy))
print("p=0.3 throughout:      ", t3_phase_horizon([], 0.3, noisy))
