"""Energy-aware randomized mixing design for decentralized learning."""

from .broadcast import (activation_probabilities, broadcast_distribution, m_perp,
                        rho_asymptotic_clique, rho_homogeneous_clique, sample_broadcast_matrix)
from .convergence import (ConvergenceParams, PSchedule, pi_aggregates, pi_aggregates_two_phase,
                          pi_values, prescribed_learning_rate, t2_min_iterations,
                          t3_phase_horizon, t_condition_convex, t_condition_nonconvex)
from .costs import BroadcastCost, UnicastCost, jetson_device_costs
from .errors import BudgetInfeasibleError, ConfigError, DesignFailureError, NoPlanError
from .mixing import (FiniteMixingDistribution, SampledMixingDistribution, metropolis_weights,
                     rho_exact, rho_monte_carlo, validate_mixing)
from .planner import (PhasePlan, RhoProfile, calibrate_rho_profile, normalize_phase_lengths,
                      plan_multi_phase, q_bound, q_k1_objective, q_k2_objective)
from .simulator import (EnergyLedger, SimState, SimTrace, SyntheticProblem, consensus_distance,
                        dpsgd_step, energy_step, local_gradient, make_quadratic_problem,
                        max_per_node_energy, run_simulation)
from .spectral import spectral_norm, sym_eigenvalues
from .topology import (Topology, is_connected, load_topology, make_clique, make_path, neighborhood,
                       roofnet_surrogate)
from .unicast import (CandidateSet, candidate_matrix, design_unicast, optimize_distribution,
                      ramanujan_rho_bound, regular_degree, sample_regular_subgraph)

__version__ = "0.1.0"
