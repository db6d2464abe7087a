"""Budgeted random mixing under the unicast cost model.

Candidates come from a random-regular-subgraph oracle; a probability
vector over them is chosen to minimize ``||sum_h p_h W_h^T W_h - J||``
subject to the expected per-node cost budget. The convex program is solved
by projected subgradient descent, projecting onto (simplex) x (budget
half-spaces) with Dykstra's alternating projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .costs import UnicastCost
from .errors import BudgetInfeasibleError, DesignFailureError
from .mixing import FiniteMixingDistribution, ideal_matrix
from .topology import Topology, is_connected

# rho values within this distance of one are treated as "not mixing"
RHO_ONE_TOL = 1e-9
FEAS_TOL = 1e-9
MAX_PAIRING_ATTEMPTS = 100


def regular_degree(c: UnicastCost, budget: float) -> int:
    """``floor(min_i (D - comp_i) / max_j link_ij)`` clamped to ``[0, m-1]``."""
    if budget < c.comp.max():
        raise BudgetInfeasibleError(
            f"budget {budget} is below the largest computation cost {c.comp.max()}")
    worst_link = c.link.max(axis=1)
    has_links = worst_link > 0
    if not has_links.any():
        return c.m - 1
    ratio = (budget - c.comp[has_links]) / worst_link[has_links]
    # guard floor() against ratios like 4.999999999 from decimal cost inputs
    d = math.floor(float(ratio.min()) + 1e-9)
    return int(min(max(d, 0), c.m - 1))


def random_regular_edges(m: int, d: int, rng: np.random.Generator) -> set:
    """Edges of a random ``d``-regular simple graph on ``m`` nodes.

    Stubs are paired at random; pairs forming loops or repeated edges are
    returned to the pool and re-paired (Steger-Wormald). An attempt that
    gets stuck is restarted, up to 100 attempts, after which the simple
    part of the last attempt is accepted. Dense degrees are drawn as the
    complement of a sparse regular graph.
    """
    if not 0 <= d < m:
        raise ValueError(f"need 0 <= d < m, got d={d}, m={m}")
    if (d * m) % 2:
        raise ValueError("d * m must be even")
    if d == 0:
        return set()
    if d > (m - 1) // 2:
        sparse = random_regular_edges(m, m - 1 - d, rng)
        return {(i, j) for i in range(m) for j in range(i + 1, m)} - sparse
    edges = set()
    for _ in range(MAX_PAIRING_ATTEMPTS):
        edges, ok = _pair_stubs(m, d, rng)
        if ok:
            return edges
    return edges


def _pair_stubs(m, d, rng):
    edges = set()
    stubs = np.repeat(np.arange(m), d)
    while stubs.size:
        rng.shuffle(stubs)
        leftover = []
        for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
            e = (a, b) if a < b else (b, a)
            if a != b and e not in edges:
                edges.add(e)
            else:
                leftover += [a, b]
        if len(leftover) == stubs.size:
            # no progress this round: check whether any legal pair remains
            pool = sorted(set(leftover))
            if not any((u, v) not in edges for k, u in enumerate(pool) for v in pool[k + 1:]):
                return edges, False
        stubs = np.array(leftover, dtype=int)
    return edges, True


def sample_regular_subgraph(t: Topology, d: int, rng: np.random.Generator) -> Topology:
    """Intersect a random ``d``-regular graph with the base topology.

    An odd degree sum is fixed by using ``d - 1``.
    """
    if not 0 <= d < t.m:
        raise ValueError(f"need 0 <= d < m, got d={d}, m={t.m}")
    if (d * t.m) % 2:
        d -= 1
    h = random_regular_edges(t.m, d, rng)
    return Topology(t.m, frozenset(h & t.edges))


def candidate_matrix(sub: Topology) -> np.ndarray:
    """``W = I - (D - A)`` with ``A[u, v] = 1 / max(deg u, deg v)`` on edges."""
    m = sub.m
    adj = sub.adjacency_matrix()
    deg = adj.sum(axis=1)
    with np.errstate(divide="ignore"):
        a = np.where(adj, 1.0 / np.maximum(deg[:, None], deg[None, :]), 0.0)
    return np.eye(m) - (np.diag(a.sum(axis=1)) - a)


@dataclass
class CandidateSet:
    """Candidate matrices ``W_0 = I, W_1, ...`` and the subgraphs behind them."""

    m: int
    matrices: list = field(default_factory=list)
    subgraphs: list = field(default_factory=list)

    def __post_init__(self):
        if not self.matrices:
            self.matrices.append(np.eye(self.m))
            self.subgraphs.append(Topology(self.m, frozenset()))

    def add(self, sub: Topology) -> np.ndarray:
        w = candidate_matrix(sub)
        self.matrices.append(w)
        self.subgraphs.append(sub)
        return w

    def __len__(self):
        return len(self.matrices)

    def link_load(self, c: UnicastCost) -> np.ndarray:
        """``load[i, h]``: node ``i``'s link cost when candidate ``h`` is used."""
        load = np.zeros((self.m, len(self)))
        for h, sub in enumerate(self.subgraphs):
            load[:, h] = (c.link * sub.adjacency_matrix()).sum(axis=1)
        return load


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    r = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[r] / (r + 1), 0.0)


def _dedupe_halfspaces(a, b):
    """Drop zero normals and keep the tightest bound among identical rows."""
    keep = np.any(a != 0, axis=1)
    a, b = a[keep], b[keep]
    if not a.size:
        return a, b
    a, inv = np.unique(a, axis=0, return_inverse=True)
    inv = inv.ravel()
    tight = np.full(len(a), np.inf)
    np.minimum.at(tight, inv, b)
    return a, tight


def project_feasible(v, a, b, max_cycles=500, tol=1e-12) -> np.ndarray:
    """Projection onto ``{simplex} & {p : a @ p <= b}`` by Dykstra's method.

    ``a`` holds one half-space normal per row.
    """
    a, b = _dedupe_halfspaces(np.atleast_2d(a), np.atleast_1d(b))
    return _dykstra(np.asarray(v, dtype=float), a, b, max_cycles, tol)


def _dykstra(v, a, b, max_cycles=500, tol=1e-12):
    x = project_simplex(v)
    if not a.size or np.all(a @ x <= b + tol):
        return x
    incr = np.zeros((1 + len(a), len(v)))
    norms = np.einsum("ij,ij->i", a, a)
    x = v.copy()
    for _ in range(max_cycles):
        x_old = x
        y = x + incr[0]
        x = project_simplex(y)
        incr[0] = y - x
        for k in range(len(a)):
            y = x + incr[k + 1]
            viol = a[k] @ y - b[k]
            x = y - (viol / norms[k]) * a[k] if viol > 0 else y
            incr[k + 1] = y - x
        if np.max(np.abs(x - x_old)) < tol:
            break
    return x


def _repair(p, load, slack):
    """Shrink mass toward ``W_0 = I`` (zero link load) until every budget holds."""
    p = np.maximum(p, 0.0)
    p /= p.sum()
    used = load @ p
    over = used > slack
    if not over.any():
        return p
    scale = np.min(np.where(over, slack / np.where(used > 0, used, 1.0), 1.0))
    q = p * scale
    q[0] += 1.0 - q.sum()
    return q


@dataclass
class DistributionResult:
    probabilities: np.ndarray
    rho: float
    iterations: int


def optimize_distribution(cands: CandidateSet, c: UnicastCost, budget: float,
                          p0=None, max_iter: int = 5000, step0: float = 0.5,
                          patience: int = 500, rtol: float = 1e-7) -> DistributionResult:
    """Minimize ``||sum_h p_h W_h^T W_h - J||`` over budget-feasible ``p``.

    Projected subgradient with steps ``step0 / sqrt(k)`` along the
    normalized subgradient ``v^T (W_h^T W_h) v`` of the top eigenvector
    ``v``; the best feasible iterate is returned. ``p0`` warm-starts the
    search (shorter vectors are zero-padded). The loop ends early once the
    best value improves by less than ``rtol`` (relative) over ``patience``
    iterations.
    """
    slack = budget - c.comp
    if np.any(slack < -FEAS_TOL):
        raise BudgetInfeasibleError(
            f"budget {budget} is infeasible even without communication")
    slack = np.maximum(slack, 0.0)
    m, k = cands.m, len(cands)
    grams = np.stack([w.T @ w for w in cands.matrices]) - ideal_matrix(m)[None]
    load = cands.link_load(c)
    half_a, half_b = _dedupe_halfspaces(load, slack)

    def objective(p):
        # every candidate is symmetric with unit row sums, so the operand is
        # PSD and its norm is the top eigenvalue
        mat = np.tensordot(p, grams, axes=1)
        lam, vec = np.linalg.eigh(0.5 * (mat + mat.T))
        return float(lam[-1]), vec[:, -1]

    p = np.zeros(k)
    if p0 is None:
        p[0] = 1.0
    else:
        p0 = np.asarray(p0, dtype=float)
        p[: len(p0)] = p0
    p = _repair(p, load, slack)
    best_f, v = objective(p)
    best_p = p.copy()
    checkpoint = best_f
    it = 0
    for it in range(1, max_iter + 1):
        g = np.einsum("i,hij,j->h", v, grams, v)
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        p = _dykstra(p - (step0 / np.sqrt(it)) * g / gn, half_a, half_b)
        p = _repair(p, load, slack)
        f, v = objective(p)
        if f < best_f:
            best_f, best_p = f, p.copy()
        if it % patience == 0:
            if checkpoint - best_f <= rtol * max(checkpoint, 1e-12):
                break
            checkpoint = best_f
    return DistributionResult(best_p, max(best_f, 0.0), it)


def expected_costs(cands: CandidateSet, probabilities, c: UnicastCost) -> np.ndarray:
    """Per-node expected cost ``comp_i + sum_h p_h * load[i, h]``."""
    return c.comp + cands.link_load(c) @ np.asarray(probabilities)


@dataclass
class UnicastDesign:
    distribution: FiniteMixingDistribution
    candidates: CandidateSet
    rho: float
    history: list
    degree: int

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def design_unicast(t: Topology, c: UnicastCost, budget: float, delta: float = 1e-3,
                   rng: np.random.Generator | None = None, max_rounds: int | None = None,
                   solver_iter: int = 5000) -> UnicastDesign:
    """Grow a candidate set from the regular-subgraph oracle and re-optimize.

    Stops once ``|rho_k - rho_{k-1}| < delta`` and ``rho_k < 1``, or after
    ``20 m`` rounds; hitting the cap with ``rho_k`` still one raises
    :class:`DesignFailureError`.
    """
    rng = np.random.default_rng(rng)
    c.check_topology(t)
    d = regular_degree(c, budget)
    cap = max_rounds if max_rounds is not None else 20 * t.m
    cands = CandidateSet(t.m)
    probs = np.array([1.0])
    history = [1.0]
    while True:
        cands.add(sample_regular_subgraph(t, d, rng))
        res = optimize_distribution(cands, c, budget, p0=probs, max_iter=solver_iter)
        rho = min(res.rho, history[-1])
        if res.rho <= history[-1]:
            probs = res.probabilities
        else:
            probs = np.append(probs, 0.0)
        history.append(rho)
        mixing = rho < 1 - RHO_ONE_TOL
        if mixing and abs(history[-1] - history[-2]) < delta:
            break
        if len(history) - 1 >= cap:
            break
    dist = FiniteMixingDistribution(cands.matrices, probs)
    design = UnicastDesign(dist, cands, float(history[-1]), history, d)
    if not history[-1] < 1 - RHO_ONE_TOL:
        why = "base topology is disconnected" if not is_connected(t) else f"degree {d}"
        raise DesignFailureError(
            f"divergence still 1 after {cap} oracle draws ({why})", design)
    return design


def ramanujan_rho_bound(c: UnicastCost, budget: float) -> float:
    """``max_i 4 * max_j link_ij / (D - comp_i)``; infinite when a node has
    no budget left for communication."""
    worst_link = c.link.max(axis=1)
    slack = budget - c.comp
    if np.any(slack < 0):
        raise BudgetInfeasibleError(f"budget {budget} below a computation cost")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(worst_link > 0, 4.0 * worst_link / slack, 0.0)
    ratio = np.where((worst_link > 0) & (slack == 0), np.inf, ratio)
    return float(ratio.max())

