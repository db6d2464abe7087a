"""Per-node energy cost models for one iteration of D-PSGD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mixing import NONZERO_TOL
from .topology import Topology


@dataclass(frozen=True)
class BroadcastCost:
    """Computation cost ``comp[i]`` plus one transmission cost ``tx[i]``
    paid whenever node ``i`` mixes with at least one neighbor."""

    comp: np.ndarray
    tx: np.ndarray

    def __post_init__(self):
        comp = np.atleast_1d(np.asarray(self.comp, dtype=float))
        tx = np.atleast_1d(np.asarray(self.tx, dtype=float))
        if comp.shape != tx.shape or comp.ndim != 1:
            raise ValueError("comp and tx must be vectors of equal length")
        if np.any(comp < 0) or np.any(tx < 0):
            raise ValueError("costs must be non-negative")
        object.__setattr__(self, "comp", comp)
        object.__setattr__(self, "tx", tx)

    @classmethod
    def homogeneous(cls, m: int, comp: float, tx: float) -> "BroadcastCost":
        return cls(np.full(m, float(comp)), np.full(m, float(tx)))

    @property
    def m(self) -> int:
        return len(self.comp)

    @property
    def is_homogeneous(self) -> bool:
        return bool(np.ptp(self.comp) == 0 and np.ptp(self.tx) == 0)

    def window(self) -> tuple[float, float]:
        """Budgets ``[max comp, max(comp + tx))`` where the design is non-trivial."""
        return float(self.comp.max()), float((self.comp + self.tx).max())

    def iteration_cost(self, w, t: Topology) -> np.ndarray:
        w = np.asarray(w)
        talks = (np.abs(w) > NONZERO_TOL) & t.adjacency_matrix()
        return self.comp + self.tx * talks.any(axis=1)


@dataclass(frozen=True)
class UnicastCost:
    """Computation cost ``comp[i]`` plus ``link[i, j]`` for every active link.

    ``link`` is a symmetric ``(m, m)`` array; only entries on base edges are
    used and entries off the edge set must be zero.
    """

    comp: np.ndarray
    link: np.ndarray

    def __post_init__(self):
        comp = np.atleast_1d(np.asarray(self.comp, dtype=float))
        link = np.asarray(self.link, dtype=float)
        if link.shape != (len(comp), len(comp)):
            raise ValueError("link costs must be an (m, m) array")
        if np.any(comp < 0) or np.any(link < 0):
            raise ValueError("costs must be non-negative")
        if not np.allclose(link, link.T, rtol=0, atol=1e-12):
            raise ValueError("link costs must be symmetric")
        object.__setattr__(self, "comp", comp)
        object.__setattr__(self, "link", link)

    @classmethod
    def homogeneous(cls, t: Topology, comp: float, link: float) -> "UnicastCost":
        return cls(np.full(t.m, float(comp)), float(link) * t.adjacency_matrix())

    @classmethod
    def from_edges(cls, t: Topology, comp, edge_costs: dict) -> "UnicastCost":
        link = np.zeros((t.m, t.m))
        seen = set()
        for (u, v), c in edge_costs.items():
            if not t.has_edge(u, v):
                raise ValueError(f"cost given for non-edge ({u}, {v})")
            link[u, v] = link[v, u] = c
            seen.add((min(u, v), max(u, v)))
        if seen != set(t.edges):
            raise ValueError("link costs must be given for every edge")
        return cls(np.broadcast_to(np.asarray(comp, dtype=float), (t.m,)).copy(), link)

    @property
    def m(self) -> int:
        return len(self.comp)

    def check_topology(self, t: Topology):
        off = (self.link != 0) & ~t.adjacency_matrix()
        if off.any():
            i, j = np.argwhere(off)[0]
            raise ValueError(f"link cost on non-edge ({i}, {j})")

    def window(self, t: Topology) -> tuple[float, float]:
        adj = t.adjacency_matrix()
        full = self.comp + (self.link * adj).sum(axis=1)
        return float(self.comp.max()), float(full.max())

    def iteration_cost(self, w, t: Topology) -> np.ndarray:
        w = np.asarray(w)
        talks = (np.abs(w) > NONZERO_TOL) & t.adjacency_matrix()
        return self.comp + (self.link * talks).sum(axis=1)


def jetson_device_costs(m: int) -> BroadcastCost:
    """Alternating TX2 / Xavier NX broadcast costs in mWh.

    Nodes numbered 1, 3, 5, ... (indices 0, 2, 4, ...) are TX2 with
    transmission cost 0.533; the others are NX with 1.333. Computation
    costs are 0.086 for both.
    """
    tx = np.where(np.arange(m) % 2 == 0, 0.533, 1.333)
    return BroadcastCost(np.full(m, 0.086), tx)
