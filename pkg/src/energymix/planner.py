"""Multi-phase planning: choose per-phase budgets and durations.

The planner never simulates. It works against a calibrated upper profile
``rho_plus(D)`` of the divergence achievable under budget ``D`` and the
bound ``q(T, D)`` on the expected maximum per-node energy of ``T``
i.i.d. iterations, and grid-searches the budgets and switch point that
minimize the resulting energy bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .broadcast import activation_probabilities, broadcast_distribution
from .convergence import ConvergenceParams, t3_phase_horizon
from .costs import BroadcastCost, UnicastCost
from .errors import NoPlanError
from .mixing import rho_exact, rho_monte_carlo
from .topology import Topology
from .unicast import design_unicast, regular_degree

DEFAULT_BUDGET_POINTS = 25
DEFAULT_TAU_POINTS = 20


def q_bound(T, D: float, m: int) -> float:
    """``D * (T + m * sqrt(T * pi / 8))``."""
    if T < 0 or D < 0:
        raise ValueError("T and D must be non-negative")
    return D * (T + m * math.sqrt(T * math.pi / 8))


@dataclass(frozen=True)
class RhoProfile:
    budgets: tuple
    rho_upper: tuple
    source: str = "empirical"

    def __post_init__(self):
        b = tuple(float(x) for x in self.budgets)
        r = tuple(float(x) for x in self.rho_upper)
        if not b or len(b) != len(r):
            raise ValueError("profile needs matching non-empty budgets and values")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise ValueError("budgets must be strictly increasing")
        if any(not 0 <= x <= 1 for x in r):
            raise ValueError("profile values must lie in [0, 1]")
        if any(r2 > r1 for r1, r2 in zip(r, r[1:])):
            raise ValueError("profile must be non-increasing in the budget")
        object.__setattr__(self, "budgets", b)
        object.__setattr__(self, "rho_upper", r)

    def rho_at(self, D: float) -> float:
        """Linear interpolation, flat beyond the calibrated range."""
        return float(np.interp(D, self.budgets, self.rho_upper))

    def p_at(self, D: float) -> float:
        return 1.0 - self.rho_at(D)

    def to_dict(self):
        return {"budgets": list(self.budgets), "rho_upper": list(self.rho_upper),
                "source": self.source}

    @classmethod
    def from_dict(cls, obj) -> "RhoProfile":
        return cls(obj["budgets"], obj["rho_upper"], obj.get("source", "empirical"))


def _is_clique(t: Topology) -> bool:
    return t.n_edges == t.m * (t.m - 1) // 2


def budget_window(mode: str, t: Topology, c) -> tuple[float, float]:
    return c.window() if mode == "broadcast" else c.window(t)


def default_budget_grid(mode: str, t: Topology, c, n: int = DEFAULT_BUDGET_POINTS) -> list:
    lo, hi = budget_window(mode, t, c)
    return [float(x) for x in np.linspace(lo, hi, n)]


def calibrate_rho_profile(mode: str, t: Topology, c, budgets, n: int = 500,
                          rng: np.random.Generator | None = None,
                          analytic: bool = True) -> RhoProfile:
    """Upper profile ``rho_plus`` on a budget grid.

    Closed forms are used where they exist (broadcast on a clique with
    homogeneous costs; unicast on a clique via ``4 / d``). Otherwise each
    budget gets a fresh design: broadcast is estimated from ``n`` samples
    plus three standard errors, unicast uses the exact divergence of the
    designed finite distribution. A running minimum makes the profile
    non-increasing.
    """
    budgets = sorted(float(b) for b in budgets)
    if not budgets:
        raise ValueError("empty budget list")
    if mode not in ("broadcast", "unicast"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng() if rng is None else rng
    clique = _is_clique(t)
    raw = []
    if mode == "broadcast":
        if not isinstance(c, BroadcastCost):
            raise ValueError("broadcast mode needs BroadcastCost")
        closed = analytic and clique and c.is_homogeneous
        for D in budgets:
            omega = activation_probabilities(c, D)
            if closed:
                raw.append(1.0 - float(omega[0]))
            else:
                est, se = rho_monte_carlo(broadcast_distribution(t, omega), n,
                                          seed=int(rng.integers(2**63)))
                raw.append(est + 3 * se)
        source = "analytic" if closed else "empirical"
    else:
        if not isinstance(c, UnicastCost):
            raise ValueError("unicast mode needs UnicastCost")
        closed = analytic and clique
        for D in budgets:
            if closed:
                d = regular_degree(c, D)
                raw.append(1.0 if d == 0 else min(1.0, 4.0 / d))
            else:
                design = design_unicast(t, c, D, rng=rng)
                raw.append(rho_exact(design.distribution))
        source = "analytic" if closed else "empirical"
    vals = np.minimum.accumulate(np.clip(raw, 0.0, 1.0))
    # drop duplicate budgets after sorting
    keep = [0] + [k for k in range(1, len(budgets)) if budgets[k] > budgets[k - 1]]
    return RhoProfile([budgets[k] for k in keep], [float(vals[k]) for k in keep], source)


class _HorizonCache:
    def __init__(self, params: ConvergenceParams):
        self.params = params
        self._get = lru_cache(maxsize=None)(self._compute)

    def _compute(self, phases, final):
        return t3_phase_horizon(phases, final, self.params)

    def __call__(self, phases, final):
        if final <= 0 or any(p <= 0 for p, n in phases if n > 0):
            return None
        return self._get(tuple(phases), final)


def q_k1_objective(D: float, profile: RhoProfile, params: ConvergenceParams,
                   _horizon=None) -> float:
    """``q(T3(p), D)`` with ``p = 1 - rho_plus(D)``; infinite when ``p = 0``."""
    horizon = _horizon or _HorizonCache(params)
    T = horizon((), profile.p_at(D))
    return math.inf if T is None else q_bound(T, D, params.m)


def q_k2_objective(D1: float, D2: float, tau1: int, profile: RhoProfile,
                   params: ConvergenceParams, _horizon=None) -> float:
    """``q(tau1, D1) + q(T3 - tau1, D2)`` for a two-phase plan."""
    if tau1 < 0:
        raise ValueError("tau1 must be non-negative")
    horizon = _horizon or _HorizonCache(params)
    p1, p2 = profile.p_at(D1), profile.p_at(D2)
    if tau1 > 0 and p1 <= 0:
        return math.inf
    T = horizon(((p1, int(tau1)),), p2)
    if T is None:
        return math.inf
    return q_bound(tau1, D1, params.m) + q_bound(T - tau1, D2, params.m)


@dataclass(frozen=True)
class Phase:
    budget: float
    duration: int
    p: float


@dataclass(frozen=True)
class PhasePlan:
    """``phases[-1].duration`` is the remainder ``horizon - sum(closed)``."""

    K: int
    phases: tuple
    horizon: int
    objective: float

    def to_json(self) -> str:
        return json.dumps({
            "K": self.K,
            "phases": [{"D": ph.budget, "tau": ph.duration, "p": ph.p} for ph in self.phases],
            "horizon": self.horizon,
            "objective": self.objective,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PhasePlan":
        obj = json.loads(text)
        phases = tuple(Phase(float(ph["D"]), int(ph["tau"]), float(ph["p"]))
                       for ph in obj["phases"])
        if len(phases) != obj["K"]:
            raise ValueError("K does not match the number of phases")
        return cls(int(obj["K"]), phases, int(obj["horizon"]), float(obj["objective"]))

    @property
    def budgets(self) -> list:
        return [ph.budget for ph in self.phases]


def default_tau_grid(t_max: int, n: int = DEFAULT_TAU_POINTS) -> list:
    """``n`` log-spaced switch points in ``[1, t_max]``, deduplicated."""
    t_max = max(1, int(t_max))
    pts = np.unique(np.round(np.geomspace(1, t_max, n)).astype(int))
    return [int(x) for x in pts]


def plan_multi_phase(max_phases: int, profile: RhoProfile, params: ConvergenceParams,
                     budgets=None, taus=None, min_phases: int = 1) -> PhasePlan:
    """Exhaustive grid search over ``K in {min_phases, .., max_phases}``.

    ``budgets`` defaults to the profile's calibration points and ``taus``
    to log-spaced values up to the best single-phase horizon. Ties go to
    the smaller ``K`` and then to the earliest grid point.
    """
    if max_phases not in (1, 2) or not 1 <= min_phases <= max_phases:
        raise ValueError("only 1 <= min_phases <= max_phases <= 2 is supported")
    budgets = list(profile.budgets if budgets is None else budgets)
    if not budgets:
        raise ValueError("empty budget grid")
    horizon = _HorizonCache(params)

    best = None
    for D in budgets:
        val = q_k1_objective(D, profile, params, horizon)
        if math.isfinite(val) and (best is None or val < best.objective):
            T = horizon((), profile.p_at(D))
            best = PhasePlan(1, (Phase(D, T, profile.p_at(D)),), T, val)
    if max_phases == 2:
        if taus is None:
            taus = default_tau_grid(best.horizon if best else 10**6)
        if not taus:
            raise ValueError("empty duration grid")
        best2 = None
        for D1 in budgets:
            p1 = profile.p_at(D1)
            if p1 <= 0:
                continue
            for D2 in budgets:
                for tau in taus:
                    val = q_k2_objective(D1, D2, tau, profile, params, horizon)
                    if math.isfinite(val) and (best2 is None or val < best2[0]):
                        best2 = (val, D1, D2, tau)
        if min_phases == 2:
            best = None
        if best2 is not None and (best is None or best2[0] < best.objective):
            val, D1, D2, tau = best2
            p1, p2 = profile.p_at(D1), profile.p_at(D2)
            T = horizon(((p1, tau),), p2)
            best = PhasePlan(2, (Phase(D1, tau, p1), Phase(D2, T - tau, p2)), T, val)
    if best is None:
        raise NoPlanError("no grid point yields a finite energy bound")
    return best


def normalize_phase_lengths(plan: PhasePlan, t_actual: int, t_bound: int) -> PhasePlan:
    """Rescale closed phases by ``t_actual / t_bound`` (rounded, at least 1).

    The bound's horizon is usually far larger than the iterations actually
    needed, so switch points are shrunk proportionally. The open final
    phase absorbs the remainder of ``t_actual``.
    """
    if not 1 <= t_actual <= t_bound:
        raise ValueError("need 1 <= t_actual <= t_bound")
    ratio = t_actual / t_bound
    closed = [replace(ph, duration=max(1, int(round(ph.duration * ratio))))
              for ph in plan.phases[:-1]]
    used = sum(ph.duration for ph in closed)
    last = replace(plan.phases[-1], duration=max(0, t_actual - used))
    return replace(plan, phases=tuple(closed) + (last,), horizon=max(t_actual, used))


def phase_distributions(plan: PhasePlan, mode: str, t: Topology, c,
                        rng: np.random.Generator | None = None) -> list:
    """Concrete ``(distribution, duration)`` schedule for a plan.

    Each phase budget is handed to the design procedure of ``mode``. The
    unicast design is randomized, so ``rng`` fixes it.
    """
    rng = np.random.default_rng() if rng is None else rng
    out = []
    for ph in plan.phases:
        if mode == "broadcast":
            d = broadcast_distribution(t, activation_probabilities(c, ph.budget))
        elif mode == "unicast":
            d = design_unicast(t, c, ph.budget, rng=rng).distribution
        else:
            raise ValueError(f"unknown mode {mode!r}")
        out.append((d, ph.duration))
    return out
