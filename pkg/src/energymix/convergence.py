"""Iteration bounds for D-PSGD under time-varying mixing.

A mixing schedule enters the bounds only through ``p^(t) = 1 - rho(W^(t))``
and the aggregates built from it. With ``r_t = 1 - p^(t) / 2``::

    pi_j = 1 + r_j * pi_{j+1}          (0-indexed, p^(j) = value at iteration j)
    Pi1(T) = mean_{j<T} pi_j
    Pi2(T) = mean_{j<T} pi_j / p^(j)

For a constant ``p`` every ``pi_j`` equals ``2 / p``. Schedules here are
piecewise constant (phases), which makes all aggregates closed-form
geometric sums, so horizons up to ``1e12`` are cheap to evaluate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

T_CAP = 10**12


@dataclass(frozen=True)
class ConvergenceParams:
    """Problem constants that enter the iteration bounds.

    ``f0`` is the initial optimality gap (nonconvex criterion), ``r0`` the
    squared initial distance to the optimum (convex criterion), ``xi0`` the
    initial consensus distance and ``m`` the node count.
    """

    L: float
    epsilon: float
    M1: float = 0.0
    M2: float = 0.0
    sigma_hat: float = 0.0
    zeta_hat: float = 0.0
    f0: float = 0.0
    xi0: float = 0.0
    r0: float = 0.0
    m: int = 1
    convex: bool = False

    def __post_init__(self):
        for name in ("L", "epsilon", "M1", "M2", "sigma_hat", "zeta_hat", "f0", "xi0", "r0"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.L <= 0 or self.epsilon <= 0:
            raise ValueError("L and epsilon must be positive")
        if self.m < 1:
            raise ValueError("m must be positive")


@dataclass(frozen=True)
class PSchedule:
    """Piecewise-constant ``p`` sequence.

    ``phases`` lists closed ``(p, length)`` blocks in order; ``final`` is the
    value used from the end of the last block onwards.
    """

    phases: tuple = ()
    final: float = 1.0

    def __post_init__(self):
        phases = tuple((float(p), int(n)) for p, n in self.phases)
        for p, n in phases:
            if not 0 <= p <= 1 or n < 0:
                raise ValueError(f"bad phase ({p}, {n})")
        if not 0 <= self.final <= 1:
            raise ValueError(f"bad final p {self.final}")
        object.__setattr__(self, "phases", phases)

    @classmethod
    def constant(cls, p: float) -> "PSchedule":
        return cls((), p)

    @classmethod
    def two_phase(cls, p1: float, tau1: int, p2: float) -> "PSchedule":
        return cls(((p1, tau1),), p2)

    @property
    def closed_length(self) -> int:
        return sum(n for _, n in self.phases)

    def blocks(self):
        """``(start, end, p)`` for each non-empty block; the last has ``end=None``."""
        out, start = [], 0
        for p, n in self.phases:
            if n > 0:
                out.append((start, start + n, p))
                start += n
        out.append((start, None, self.final))
        return out

    def p_at(self, j: int) -> float:
        for start, end, p in self.blocks():
            if end is None or j < end:
                return p
        raise AssertionError("unreachable")

    def p_min(self) -> float:
        return min(p for _, _, p in self.blocks())


def _ratio(p):
    return 1.0 - p / 2.0


def _fixed_point(p):
    return math.inf if p <= 0 else 2.0 / p


def _block_entry_pi(blocks):
    """``pi`` at the first index past each block's end (the next block's start)."""
    after = [0.0] * len(blocks)
    nxt = _fixed_point(blocks[-1][2])
    after[-1] = nxt
    for b in range(len(blocks) - 2, -1, -1):
        after[b] = nxt
        start, end, p = blocks[b]
        nxt = _pi_in_block(p, end - start, nxt)
    return after


def _pi_in_block(p, k, pi_after):
    """``pi`` for an index ``k`` steps before the end of a block with value ``p``."""
    fp = _fixed_point(p)
    if math.isinf(fp) or math.isinf(pi_after):
        return math.inf
    return fp + _ratio(p) ** k * (pi_after - fp)


def _pi_at(s: PSchedule, j: int) -> float:
    blocks = s.blocks()
    after = _block_entry_pi(blocks)
    for b, (start, end, p) in enumerate(blocks):
        if end is None:
            return _fixed_point(p)
        if j < end:
            return _pi_in_block(p, end - j, after[b])
    raise AssertionError("unreachable")


def pi_values(s: PSchedule, T: int) -> list:
    """``pi_0 .. pi_{T-1}`` by the backward recursion.

    The recursion is seeded with ``pi_T``, taken in closed form from the
    tail of the schedule. Any zero ``p`` makes the values infinite.
    """
    if T <= 0:
        return []
    if s.p_min() <= 0:
        return [math.inf] * T
    out = [0.0] * T
    nxt = _pi_at(s, T)
    for j in range(T - 1, -1, -1):
        nxt = 1.0 + _ratio(s.p_at(j)) * nxt
        out[j] = nxt
    return out


def _geom(r, lo, hi):
    """``sum_{k=lo}^{hi} r^k`` for ``0 <= r < 1``."""
    if hi < lo:
        return 0.0
    return r**lo * (1.0 - r ** (hi - lo + 1)) / (1.0 - r)


def pi_aggregates(s: PSchedule, T: int) -> tuple[float, float]:
    """``(Pi1(T), Pi2(T))`` in closed form over the schedule's blocks."""
    if T < 1:
        raise ValueError("T must be at least 1")
    blocks = s.blocks()
    if any(p <= 0 and (end is None or start < T) for start, end, p in blocks):
        return math.inf, math.inf
    after = _block_entry_pi(blocks)
    s1 = s2 = 0.0
    for b, (start, end, p) in enumerate(blocks):
        if start >= T:
            break
        fp = _fixed_point(p)
        if end is None:
            part = (T - start) * fp
        else:
            stop = min(end, T)
            # j runs over [start, stop); k = end - j runs over [end-stop+1, end-start]
            part = (stop - start) * fp + (after[b] - fp) * _geom(
                _ratio(p), end - stop + 1, end - start)
        s1 += part
        s2 += part / p
    return s1 / T, s2 / T


def pi_aggregates_two_phase(p1: float, tau1: int, p2: float, T: int) -> tuple[float, float]:
    """Closed forms for ``p1`` on the first ``tau1`` iterations, then ``p2``."""
    if not (0 < p1 <= 1 and 0 < p2 <= 1):
        raise ValueError("p1 and p2 must lie in (0, 1]")
    if not 0 <= tau1 <= T or T < 1:
        raise ValueError("need 1 <= T and 0 <= tau1 <= T")
    r = _ratio(p1)
    g = _geom(r, 1, tau1)
    pi1 = 2 * (T - tau1) / (T * p2) + 2 * tau1 / (T * p1) - (2 / (T * p1) - 2 / (T * p2)) * g
    pi2 = (2 * (T - tau1) / (T * p2**2) + 2 * tau1 / (T * p1**2)
           - (2 / (T * p1**2) - 2 / (T * p2 * p1)) * g)
    return pi1, pi2


def nonconvex_bound(Pi1, Pi2, pi0, p_min, params: ConvergenceParams, T) -> float:
    """Upper bound on ``(1/T) sum ||grad F(xbar_t)||^2 / 16``.

    Compared against ``epsilon / 16``.
    """
    c = params
    if p_min <= 0 or any(math.isinf(x) for x in (Pi1, Pi2, pi0)):
        return math.inf
    kappa = math.sqrt((1 + c.M1) * (1 + c.M2)) / p_min
    alpha = 2 * c.L**2 * ((c.sigma_hat**2 + c.M1 * c.zeta_hat**2) * Pi1
                          + 6 * c.zeta_hat**2 * Pi2)
    noise = 2 * math.sqrt(c.sigma_hat**2 * c.L * c.f0 / (c.m * T))
    drift = 2 * (c.f0**2 * alpha / T**2) ** (1 / 3)
    linear = (c.L**2 * (2 + pi0) * c.xi0 + 20 * c.L * kappa * c.f0
              + 4 * c.f0 * c.L * (c.M1 + 1)) / T
    return noise + drift + linear


def convex_bound(Pi1, Pi2, pi0, p_min, params: ConvergenceParams, T) -> float:
    """Upper bound on ``(1/T) sum (F(xbar_t) - F_inf)``; compared against ``epsilon``."""
    c = params
    if p_min <= 0 or any(math.isinf(x) for x in (Pi1, Pi2, pi0)):
        return math.inf
    noise = 4 * math.sqrt(c.sigma_hat**2 * c.r0 / (c.m * T))
    linear = (6 * c.L * (1 + pi0) * c.xi0 + 1800 * c.r0 * c.L / p_min) / T
    drift = (220 * c.r0 ** (2 / 3)
             * (c.L * (Pi1 * c.sigma_hat**2 + Pi2 * c.zeta_hat**2)) ** (1 / 3) / T ** (2 / 3))
    return noise + linear + drift


def t_condition_nonconvex(Pi1, Pi2, pi0, p_min, params, T) -> bool:
    return nonconvex_bound(Pi1, Pi2, pi0, p_min, params, T) <= params.epsilon / 16


def t_condition_convex(Pi1, Pi2, pi0, p_min, params, T) -> bool:
    return convex_bound(Pi1, Pi2, pi0, p_min, params, T) <= params.epsilon


def condition_holds(s: PSchedule, params: ConvergenceParams, T: int) -> bool:
    """Whether ``T`` iterations of schedule ``s`` meet the applicable criterion."""
    pi1, pi2 = pi_aggregates(s, T)
    pi0 = _pi_at(s, 0)
    p_min = _p_min_within(s, T)
    check = t_condition_convex if params.convex else t_condition_nonconvex
    return check(pi1, pi2, pi0, p_min, params, T)


def _p_min_within(s: PSchedule, T: int) -> float:
    return min(p for start, _, p in s.blocks() if start < T)


def t2_min_iterations(s: PSchedule, params: ConvergenceParams, t_min: int = 1):
    """Smallest ``T >= t_min`` meeting the criterion, or ``None`` past ``T_CAP``.

    Doubling to bracket the first passing ``T`` and then bisection; this
    agrees with a linear scan because the criterion stays satisfied once
    it first holds.
    """
    t_min = max(1, int(t_min))
    if s.p_min() <= 0:
        return None
    if condition_holds(s, params, t_min):
        return t_min
    lo, hi = t_min, 2 * t_min
    while not condition_holds(s, params, hi):
        if hi > T_CAP:
            return None
        lo, hi = hi, 2 * hi
    # invariant: condition fails at lo, holds at hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if condition_holds(s, params, mid):
            hi = mid
        else:
            lo = mid
    return hi


def t3_phase_horizon(phases: Sequence, final_p: float, params: ConvergenceParams):
    """Total iterations for a phase plan: closed phases ``(p_s, tau_s)`` then ``final_p``.

    The search starts at the combined length of the closed phases.
    """
    s = PSchedule(tuple(phases), final_p)
    return t2_min_iterations(s, params, t_min=max(1, s.closed_length))


def prescribed_learning_rate(params: ConvergenceParams, T: int, s: PSchedule) -> float:
    """Learning rate used by the bound's proof for horizon ``T``.

    Terms whose denominator vanishes (e.g. no gradient noise) are treated
    as unconstrained.
    """
    c = params
    pi1, pi2 = pi_aggregates(s, T)
    p_min = _p_min_within(s, T)
    if p_min <= 0:
        return 0.0
    terms = []
    if c.convex:
        if c.sigma_hat > 0:
            terms.append(math.sqrt(c.m * c.r0 / (c.sigma_hat**2 * T)))
        terms.append(p_min / (900 * c.L))
        drift = T * c.L * (pi1 * c.sigma_hat**2 + c.zeta_hat**2 * pi2)
        if drift > 0:
            terms.append((c.r0 / drift) ** (1 / 3))
    else:
        if c.sigma_hat > 0:
            terms.append(math.sqrt(c.m * c.f0 / (c.sigma_hat**2 * c.L * T)))
        alpha = 2 * c.L**2 * ((c.sigma_hat**2 + c.M1 * c.zeta_hat**2) * pi1
                              + 6 * c.zeta_hat**2 * pi2)
        if alpha > 0:
            terms.append((c.f0 / (T * alpha)) ** (1 / 3))
        kappa = math.sqrt((1 + c.M1) * (1 + c.M2)) / p_min
        terms.append(1 / (20 * c.L * kappa))
        terms.append(1 / (4 * c.L * (c.M1 + 1)))
    return min(terms)
