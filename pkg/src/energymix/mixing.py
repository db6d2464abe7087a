"""Mixing matrices, distributions over them, and their divergence from J.

A mixing matrix is a plain ``(m, m)`` float array. The divergence of a
(random) mixing matrix ``W`` is ``||E[W^T W] - J||`` with ``J = 11^T / m``;
``p = 1 - divergence`` is what drives the iteration bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spectral import spectral_norm
from .topology import Topology

ROW_SUM_TOL = 1e-10
SYMMETRY_TOL = 1e-12
NONZERO_TOL = 1e-15
PROB_TOL = 1e-12
MC_BATCHES = 10


def ideal_matrix(m: int) -> np.ndarray:
    return np.full((m, m), 1.0 / m)


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors

    def __bool__(self):
        return self.valid


def validate_mixing(w, t: Topology) -> ValidationReport:
    """Check symmetry, unit row sums and topology compliance of ``w``.

    Entries outside ``[0, 1]`` are legal (only symmetry and unit row sums
    are needed for convergence) and are reported as warnings.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (t.m, t.m):
        raise ValueError(f"matrix shape {w.shape} does not match m={t.m}")
    rep = ValidationReport()
    asym = np.abs(w - w.T)
    if asym.max(initial=0.0) > SYMMETRY_TOL:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        rep.errors.append(f"asymmetric at ({i},{j}): {w[i, j]!r} vs {w[j, i]!r}")
    rows = w.sum(axis=1)
    for i in np.flatnonzero(np.abs(rows - 1.0) > ROW_SUM_TOL):
        rep.errors.append(f"row {i} sums to {rows[i]!r}")
    allowed = t.adjacency_matrix() | np.eye(t.m, dtype=bool)
    bad = (np.abs(w) > NONZERO_TOL) & ~allowed
    for i, j in zip(*np.nonzero(bad)):
        if i < j:
            rep.errors.append(f"topology violation at ({i},{j}): no such edge")
    if np.any(w < -NONZERO_TOL) or np.any(w > 1 + NONZERO_TOL):
        rep.warnings.append("entries outside [0, 1]")
    return rep


def metropolis_weights(t: Topology, active) -> np.ndarray:
    """Metropolis-Hastings weights among the active node set ``U``.

    For active neighbors ``i != j``, ``W[i, j] = 1 / max(|V_i & U|, |V_j & U|)``
    with ``V_i`` the closed neighborhood. Inactive nodes keep identity rows.
    """
    m = t.m
    u = np.zeros(m, dtype=bool)
    u[list(active)] = True
    return _metropolis_from_mask(t.adjacency_matrix(), u)


def _metropolis_from_mask(adj: np.ndarray, u: np.ndarray) -> np.ndarray:
    links = adj & u[:, None] & u[None, :]
    # |V_i & U| for active i: active neighbors plus i itself
    deg = links.sum(axis=1) + 1
    w = np.where(links, 1.0 / np.maximum(deg[:, None], deg[None, :]), 0.0)
    w.flat[:: len(w) + 1] = 1.0 - w.sum(axis=1)
    return w


class FiniteMixingDistribution:
    """Finitely supported distribution over mixing matrices."""

    def __init__(self, matrices: Sequence, probabilities: Sequence[float]):
        mats = [np.asarray(w, dtype=float) for w in matrices]
        probs = np.asarray(probabilities, dtype=float)
        if not mats:
            raise ValueError("empty support")
        if len(mats) != len(probs):
            raise ValueError("matrices and probabilities differ in length")
        if np.any(probs < -PROB_TOL) or abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities must be a distribution, got {probs}")
        m = mats[0].shape[0]
        if any(w.shape != (m, m) for w in mats):
            raise ValueError("support matrices differ in shape")
        self.matrices = mats
        self.probabilities = np.clip(probs, 0.0, None)
        self.m = m

    @classmethod
    def point_mass(cls, w) -> "FiniteMixingDistribution":
        return cls([w], [1.0])

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        k = rng.choice(len(self.matrices), p=self.probabilities / self.probabilities.sum())
        return self.matrices[k]

    def gram(self) -> np.ndarray:
        """``E[W^T W]``."""
        return sum(p * (w.T @ w) for p, w in zip(self.probabilities, self.matrices))

    def to_json(self) -> str:
        return json.dumps({
            "m": self.m,
            "probabilities": self.probabilities.tolist(),
            "matrices": [w.tolist() for w in self.matrices],
        })

    @classmethod
    def from_json(cls, text: str) -> "FiniteMixingDistribution":
        obj = json.loads(text)
        d = cls(obj["matrices"], obj["probabilities"])
        if d.m != obj.get("m", d.m):
            raise ValueError("declared m does not match matrix size")
        return d


class SampledMixingDistribution:
    """Distribution given only by a sampling procedure ``sampler(rng) -> W``."""

    def __init__(self, sampler: Callable[[np.random.Generator], np.ndarray], m: int):
        self.sampler = sampler
        self.m = m

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sampler(rng)


def rho_exact(d: FiniteMixingDistribution) -> float:
    """Divergence ``||E[W^T W] - J||`` of a finite distribution."""
    if not isinstance(d, FiniteMixingDistribution):
        raise TypeError("exact divergence needs finite support; "
                        "use rho_monte_carlo for sampled distributions")
    return spectral_norm(d.gram() - ideal_matrix(d.m))


def rho_monte_carlo(d, n: int, seed=None) -> tuple[float, float]:
    """Monte-Carlo divergence estimate and its batch-means standard error.

    The estimate is ``||mean_k W_k^T W_k - J||`` over ``n`` draws. The
    standard error comes from the same statistic on ``10`` equal batches.
    """
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    rng = np.random.default_rng(seed)
    m = d.m
    n_batches = min(MC_BATCHES, n)
    sizes = np.full(n_batches, n // n_batches)
    sizes[: n % n_batches] += 1
    jmat = ideal_matrix(m)
    total = np.zeros((m, m))
    batch_rho = []
    for size in sizes:
        acc = np.zeros((m, m))
        for _ in range(size):
            w = d.sample(rng)
            acc += w.T @ w
        total += acc
        batch_rho.append(spectral_norm(_sym(acc / size) - jmat))
    est = spectral_norm(_sym(total / n) - jmat)
    se = float(np.std(batch_rho, ddof=1) / np.sqrt(n_batches))
    return est, se


def _sym(a):
    return 0.5 * (a + a.T)


def matrix_to_json(w) -> str:
    w = np.asarray(w, dtype=float)
    return json.dumps({"m": w.shape[0], "entries": w.tolist()})


def matrix_from_json(text: str) -> np.ndarray:
    obj = json.loads(text)
    w = np.asarray(obj["entries"], dtype=float)
    if w.shape != (obj["m"], obj["m"]):
        raise ValueError(f"entries shape {w.shape} does not match m={obj['m']}")
    return w
