"""Undirected base topologies: construction, loading and neighborhoods."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

ROOFNET_NODES = 33
ROOFNET_EDGES = 187


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph on nodes ``0 .. m-1``.

    Edges are stored as sorted pairs ``(u, v)`` with ``u < v``.
    """

    m: int
    edges: frozenset
    adjacency: tuple = field(init=False, repr=False, compare=False)
    _adj_matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"node count must be positive, got {self.m}")
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.m and 0 <= v < self.m):
                raise ValueError(f"edge ({u}, {v}) out of range for m={self.m}")
            norm.add((min(u, v), max(u, v)))
        adj = [set() for _ in range(self.m)]
        for u, v in norm:
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "edges", frozenset(norm))
        object.__setattr__(self, "adjacency", tuple(frozenset(a) for a in adj))
        a = np.zeros((self.m, self.m), dtype=bool)
        if norm:
            idx = np.array(sorted(norm))
            a[idx[:, 0], idx[:, 1]] = True
            a[idx[:, 1], idx[:, 0]] = True
        a.flags.writeable = False
        object.__setattr__(self, "_adj_matrix", a)

    @classmethod
    def from_edges(cls, m: int, edges: Iterable) -> "Topology":
        return cls(m, frozenset(tuple(e) for e in edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.adjacency[i]

    def adjacency_matrix(self) -> np.ndarray:
        """Boolean ``m x m`` adjacency without self-loops (read-only)."""
        return self._adj_matrix

    def edge_list_text(self) -> str:
        lines = [f"m {self.m}"]
        lines += [f"{u} {v}" for u, v in sorted(self.edges)]
        return "\n".join(lines) + "\n"


def make_clique(m: int) -> Topology:
    if m < 1:
        raise ValueError(f"clique needs at least one node, got {m}")
    return Topology(m, frozenset((i, j) for i in range(m) for j in range(i + 1, m)))


def make_path(m: int) -> Topology:
    return Topology(m, frozenset((i, i + 1) for i in range(m - 1)))


def load_topology(edge_list_text: str) -> Topology:
    """Parse a whitespace-separated edge list.

    Lines are ``u v`` pairs; an optional ``m <count>`` header fixes the node
    count (otherwise it is ``max index + 1``). Blank lines and lines starting
    with ``#`` are skipped. Duplicate and reversed pairs collapse to one edge.
    """
    m = None
    edges = set()
    max_idx = -1
    for lineno, raw in enumerate(edge_list_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "m":
            if len(parts) != 2 or m is not None:
                raise ValueError(f"line {lineno}: malformed node-count header")
            m = int(parts[1])
            continue
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer node index") from None
        if u == v:
            raise ValueError(f"line {lineno}: self-loop at node {u}")
        if u < 0 or v < 0:
            raise ValueError(f"line {lineno}: negative node index")
        edges.add((min(u, v), max(u, v)))
        max_idx = max(max_idx, u, v)
    if m is None:
        m = max_idx + 1
    if max_idx >= m:
        raise ValueError(f"node index {max_idx} out of range for m={m}")
    if m < 1:
        raise ValueError("edge list defines no nodes")
    return Topology(m, frozenset(edges))


def neighborhood(t: Topology, i: int) -> frozenset:
    """Closed one-hop neighborhood of ``i`` (includes ``i`` itself)."""
    if not 0 <= i < t.m:
        raise ValueError(f"node {i} out of range for m={t.m}")
    return t.adjacency[i] | {i}


def is_connected(t: Topology) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in t.adjacency[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == t.m


def random_connected_graph(m: int, p: float, rng: np.random.Generator) -> Topology:
    """Erdos-Renyi G(m, p) conditioned on connectivity (rejection sampling)."""
    iu = np.triu_indices(m, k=1)
    for _ in range(10_000):
        keep = rng.random(len(iu[0])) < p
        t = Topology(m, frozenset(zip(iu[0][keep].tolist(), iu[1][keep].tolist())))
        if is_connected(t):
            return t
    raise RuntimeError(f"no connected G({m}, {p}) draw after 10000 tries")


def roofnet_surrogate(seed: int = 0, m: int = ROOFNET_NODES,
                      n_edges: int = ROOFNET_EDGES) -> Topology:
    """Connected mesh-like stand-in with Roofnet's node and link counts.

    Nodes are dropped uniformly in the unit square and the ``n_edges``
    shortest pairs become links; layouts that come out disconnected are
    redrawn. This is a labeled surrogate, not the measured Roofnet graph.
    """
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(m, k=1)
    for _ in range(1000):
        pts = rng.random((m, 2))
        dist = np.linalg.norm(pts[iu[0]] - pts[iu[1]], axis=1)
        order = np.argsort(dist, kind="stable")[:n_edges]
        t = Topology(m, frozenset(zip(iu[0][order].tolist(), iu[1][order].tolist())))
        if is_connected(t):
            return t
    raise RuntimeError("could not draw a connected surrogate layout")
