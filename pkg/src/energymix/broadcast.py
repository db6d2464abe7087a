"""Budgeted random mixing under the broadcast cost model.

Each node joins the active set ``U`` independently with probability
``omega_i = min((D - comp_i) / tx_i, 1)``; active nodes mix among active
neighbors with Metropolis-Hastings weights and everyone else keeps its
own model. On a clique the resulting divergence has an analytic
large-``m`` form in terms of ``omega`` and ``E[1/|U| | U != {}]``.
"""

from __future__ import annotations

import numpy as np

from .costs import BroadcastCost
from .errors import BudgetInfeasibleError
from .mixing import SampledMixingDistribution, _metropolis_from_mask, ideal_matrix
from .spectral import spectral_norm
from .topology import Topology


def activation_probabilities(c: BroadcastCost, budget: float) -> np.ndarray:
    """Per-node activation probabilities ``omega`` for a budget ``D``."""
    if budget < c.comp.max():
        raise BudgetInfeasibleError(
            f"budget {budget} is below the largest computation cost {c.comp.max()}")
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.where(c.tx > 0, (budget - c.comp) / c.tx, 1.0)
    return np.clip(omega, 0.0, 1.0)


def sample_active_set(omega, rng: np.random.Generator) -> np.ndarray:
    return rng.random(len(omega)) < np.asarray(omega)


def sample_broadcast_matrix(t: Topology, omega, rng: np.random.Generator,
                            adj: np.ndarray | None = None) -> np.ndarray:
    """Draw one mixing matrix: Bernoulli activation then Metropolis weights.

    ``adj`` may carry a precomputed adjacency matrix of ``t`` for speed.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (t.m,):
        raise ValueError(f"need {t.m} activation probabilities, got {omega.shape}")
    if adj is None:
        adj = t.adjacency_matrix()
    return _metropolis_from_mask(adj, sample_active_set(omega, rng))


def broadcast_distribution(t: Topology, omega) -> SampledMixingDistribution:
    omega = np.asarray(omega, dtype=float)
    adj = t.adjacency_matrix()
    return SampledMixingDistribution(
        lambda rng: sample_broadcast_matrix(t, omega, rng, adj), t.m)


def active_count_pmf(omega) -> np.ndarray:
    """Distribution of ``|U|`` (Poisson binomial) by the O(m^2) recursion."""
    pmf = np.array([1.0])
    for w in np.asarray(omega, dtype=float):
        nxt = np.zeros(len(pmf) + 1)
        nxt[:-1] = pmf * (1 - w)
        nxt[1:] += pmf * w
        pmf = nxt
    return pmf


def m_perp(omega) -> float:
    """``E[1/|U| | U nonempty]`` for independent activations ``omega``."""
    pmf = active_count_pmf(omega)
    nonempty = 1.0 - pmf[0]
    if pmf[0] >= 1.0 or nonempty <= 0.0:
        raise ValueError("no node can activate; E[1/|U| | U nonempty] is undefined")
    k = np.arange(1, len(pmf))
    return float(np.sum(pmf[1:] / k) / pmf[1:].sum())


def rho_asymptotic_clique(omega) -> float:
    """Large-``m`` divergence of the clique design,
    ``||m_perp * omega omega^T + diag(1 - omega) - J||``."""
    omega = np.asarray(omega, dtype=float)
    mp = m_perp(omega)
    a = mp * np.outer(omega, omega) + np.diag(1.0 - omega) - ideal_matrix(len(omega))
    return spectral_norm(a)


def rho_homogeneous_clique(comp: float, tx: float, budget: float) -> float:
    """``1 - (D - comp) / tx`` for homogeneous costs on a clique."""
    if not comp <= budget < comp + tx:
        raise ValueError(f"budget {budget} outside [{comp}, {comp + tx})")
    return 1.0 - (budget - comp) / tx
