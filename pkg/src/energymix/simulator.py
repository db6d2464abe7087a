"""D-PSGD on synthetic quadratic objectives with per-node energy accounting.

Node ``i`` holds ``F_i(x) = 0.5 * ||A_i x - b_i||^2``; the global objective
is ``F = mean_i F_i``. Gradients carry isotropic Gaussian noise of scale
``noise`` per coordinate.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .convergence import ConvergenceParams
from .costs import BroadcastCost, UnicastCost
from .mixing import NONZERO_TOL
from .topology import Topology


class SyntheticProblem:
    """Quadratic federated problem with exact optimum.

    ``A`` has shape ``(m, dim, dim)`` and ``b`` shape ``(m, dim)``.
    """

    def __init__(self, A, b, noise: float = 0.0):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or b.shape != A.shape[:2]:
            raise ValueError("need A of shape (m, d, d) and b of shape (m, d)")
        if noise < 0:
            raise ValueError("noise must be non-negative")
        self.A, self.b, self.noise = A, b, float(noise)
        self.m, self.dim = b.shape
        # F(x) = 0.5 x^T H x - g^T x + c0, all averaged over nodes
        self.H = np.einsum("kij,kil->jl", A, A) / self.m
        self.g = np.einsum("kij,ki->j", A, b) / self.m
        self.c0 = 0.5 * float(np.sum(b * b)) / self.m
        self.x_star = np.linalg.solve(self.H, self.g)
        self.f_inf = self.loss(self.x_star)

    def loss(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x - self.g @ x + self.c0)

    def full_gradient(self, x) -> np.ndarray:
        return self.H @ np.asarray(x, dtype=float) - self.g

    def local_minimizer(self, i: int) -> np.ndarray:
        return np.linalg.lstsq(self.A[i], self.b[i], rcond=None)[0]

    def smoothness(self) -> float:
        """Largest local smoothness constant ``max_i ||A_i||_2^2``."""
        return float(max(np.linalg.norm(a, 2) ** 2 for a in self.A))

    def heterogeneity(self) -> float:
        """``mean_i ||grad F_i(x*)||^2``."""
        r = np.einsum("kij,j->ki", self.A, self.x_star) - self.b
        grads = np.einsum("kij,ki->kj", self.A, r)
        return float(np.mean(np.sum(grads**2, axis=1)))

    def convergence_params(self, epsilon: float, x0=None, convex: bool = True) -> ConvergenceParams:
        """Constants of the iteration bounds for this problem from start ``x0``.

        ``x0`` is an ``(m, dim)`` start (zeros by default).
        """
        x0 = np.zeros((self.m, self.dim)) if x0 is None else np.asarray(x0, dtype=float)
        xbar = x0.mean(axis=0)
        return ConvergenceParams(
            L=self.smoothness(), epsilon=epsilon,
            sigma_hat=self.noise * math.sqrt(self.dim),
            zeta_hat=math.sqrt(self.heterogeneity()),
            f0=self.loss(xbar) - self.f_inf,
            xi0=float(np.mean(np.sum((x0 - xbar) ** 2, axis=1))),
            r0=float(np.sum((xbar - self.x_star) ** 2)),
            m=self.m, convex=convex)


def _well_conditioned(dim: int, rng: np.random.Generator) -> np.ndarray:
    q1, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    q2, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    s = rng.uniform(0.5, 1.5, size=dim)
    return (q1 * s) @ q2.T


def make_quadratic_problem(m: int, dim: int, hetero: float, noise: float,
                           rng: np.random.Generator) -> SyntheticProblem:
    """Random instance with condition numbers at most 3.

    All local minimizers equal a shared point when ``hetero = 0``; otherwise
    each ``b_i`` is shifted by ``hetero`` times a standard Gaussian vector.
    """
    if m < 1 or dim < 1:
        raise ValueError("m and dim must be positive")
    if hetero < 0 or noise < 0:
        raise ValueError("hetero and noise must be non-negative")
    A = np.stack([_well_conditioned(dim, rng) for _ in range(m)])
    center = rng.standard_normal(dim)
    b = np.einsum("kij,j->ki", A, center) + hetero * rng.standard_normal((m, dim))
    return SyntheticProblem(A, b, noise)


def local_gradient(p: SyntheticProblem, i: int, x, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.dim,):
        raise ValueError(f"x must have shape ({p.dim},)")
    g = p.A[i].T @ (p.A[i] @ x - p.b[i])
    if p.noise > 0:
        g = g + p.noise * rng.standard_normal(p.dim)
    return g


def stochastic_gradients(p: SyntheticProblem, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """All nodes' gradients at once; row ``i`` is node ``i`` at ``x[i]``."""
    r = np.einsum("kij,kj->ki", p.A, x) - p.b
    g = np.einsum("kij,ki->kj", p.A, r)
    if p.noise > 0:
        g = g + p.noise * rng.standard_normal(g.shape)
    return g


@dataclass
class SimState:
    x: np.ndarray
    t: int = 0

    @property
    def mean(self) -> np.ndarray:
        return self.x.mean(axis=0)


def dpsgd_step(s: SimState, w, eta: float, p: SyntheticProblem,
               rng: np.random.Generator) -> SimState:
    """``x_i <- sum_j W[i, j] (x_j - eta * g_j)`` for all nodes at once."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    w = np.asarray(w, dtype=float)
    if w.shape != (p.m, p.m) or s.x.shape != (p.m, p.dim):
        raise ValueError("dimension mismatch")
    half = s.x - eta * stochastic_gradients(p, s.x, rng)
    return SimState(w @ half, s.t + 1)


def consensus_distance(s) -> float:
    """``(1/m) sum_i ||x_i - xbar||^2``; accepts a state or a raw matrix."""
    x = s.x if isinstance(s, SimState) else np.asarray(s, dtype=float)
    return float(np.mean(np.sum((x - x.mean(axis=0)) ** 2, axis=1)))


@dataclass
class EnergyLedger:
    energy: np.ndarray
    mode: str = "broadcast"

    @classmethod
    def zeros(cls, m: int, mode: str = "broadcast") -> "EnergyLedger":
        if mode not in ("broadcast", "unicast"):
            raise ValueError(f"unknown mode {mode!r}")
        return cls(np.zeros(m), mode)


def energy_step(l: EnergyLedger, w, c, t: Topology) -> EnergyLedger:
    """Charge one iteration of ``w`` to every node."""
    expected = BroadcastCost if l.mode == "broadcast" else UnicastCost
    if not isinstance(c, expected):
        raise ValueError(f"{l.mode} ledger needs {expected.__name__}")
    w = np.asarray(w)
    talks = (np.abs(w) > NONZERO_TOL) & t.adjacency_matrix()
    if l.mode == "broadcast":
        inc = c.comp + c.tx * talks.any(axis=1)
    else:
        inc = c.comp + (c.link * talks).sum(axis=1)
    return EnergyLedger(l.energy + inc, l.mode)


def max_per_node_energy(l: EnergyLedger) -> float:
    return float(l.energy.max()) if len(l.energy) else 0.0


@dataclass
class SimTrace:
    """Row ``k`` describes the state after ``k`` iterations."""

    loss: list = field(default_factory=list)
    consensus: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    f_inf: float = 0.0

    def __len__(self):
        return len(self.loss)

    @property
    def iterations(self) -> int:
        return len(self.loss) - 1

    def gap(self) -> np.ndarray:
        return np.asarray(self.loss) - self.f_inf

    def first_hit(self, epsilon: float):
        """First iteration with ``F(xbar) - F_inf <= epsilon``, else ``None``."""
        hits = np.flatnonzero(self.gap() <= epsilon)
        return int(hits[0]) if len(hits) else None

    def max_energy(self, upto: int | None = None) -> float:
        k = self.iterations if upto is None else upto
        return float(np.max(self.energy[k]))

    def write_csv(self, path):
        m = len(self.energy[0])
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iteration", "loss", "consensus"] + [f"energy_node_{i}" for i in range(m)])
            for k, (f, xi, e) in enumerate(zip(self.loss, self.consensus, self.energy)):
                wr.writerow([k, repr(f), repr(xi)] + [repr(float(v)) for v in e])

    def summary(self, epsilon: float | None = None) -> dict:
        out = {"iterations": self.iterations, "final_loss": self.loss[-1],
               "final_gap": self.loss[-1] - self.f_inf,
               "max_per_node_energy": self.max_energy()}
        if epsilon is not None:
            hit = self.first_hit(epsilon)
            out["iterations_to_epsilon"] = hit
            out["max_per_node_energy_at_epsilon"] = None if hit is None else self.max_energy(hit)
        return out

    def write_summary(self, path, epsilon: float | None = None):
        with open(path, "w") as fh:
            json.dump(self.summary(epsilon), fh, indent=2)


def run_simulation(p: SyntheticProblem, schedule, eta: float, T: int, c, t: Topology,
                   rng: np.random.Generator, x0=None, stop_gap: float | None = None,
                   mode: str | None = None) -> SimTrace:
    """Run ``T`` iterations of D-PSGD under a phase schedule.

    ``schedule`` is a list of ``(distribution, duration)`` pairs; each
    iteration draws a fresh matrix from the current phase and the last
    phase runs until ``T`` whatever its duration. With ``stop_gap`` the run
    ends as soon as ``F(xbar) - F_inf <= stop_gap``.
    """
    if not schedule:
        raise ValueError("empty schedule")
    if mode is None:
        mode = "broadcast" if isinstance(c, BroadcastCost) else "unicast"
    x = np.zeros((p.m, p.dim)) if x0 is None else np.array(x0, dtype=float)
    state = SimState(x)
    ledger = EnergyLedger.zeros(p.m, mode)
    trace = SimTrace(f_inf=p.f_inf)

    def record():
        trace.loss.append(p.loss(state.mean))
        trace.consensus.append(consensus_distance(state))
        trace.energy.append(ledger.energy.copy())

    record()
    ends = np.cumsum([d for _, d in schedule[:-1]]).tolist()
    phase = 0
    for k in range(T):
        if stop_gap is not None and trace.loss[-1] - p.f_inf <= stop_gap:
            break
        while phase < len(ends) and k >= ends[phase]:
            phase += 1
        w = schedule[phase][0].sample(rng)
        state = dpsgd_step(state, w, eta, p, rng)
        ledger = energy_step(ledger, w, c, t)
        record()
    return trace
