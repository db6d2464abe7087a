"""Command-line entry point: design, calibrate, plan and simulate from a JSON config.

Exit status: 0 on success, 2 for configuration errors, 3 when a budget or
plan is infeasible and 4 when a mixing design fails.

A config looks like::

    {
      "topology": {"kind": "clique", "m": 33},
      "mode": "broadcast",
      "costs": {"comp": 0.086, "tx": 0.533},
      "budget": 0.3,
      "convergence": {"epsilon": 0.001},
      "planner": {"max_phases": 2},
      "simulation": {"dim": 20, "hetero": 1.0, "noise": 0.1, "seeds": [0]}
    }

Only ``topology``, ``mode`` and ``costs`` are required.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .broadcast import activation_probabilities, broadcast_distribution, rho_homogeneous_clique
from .convergence import ConvergenceParams
from .costs import BroadcastCost, UnicastCost
from .errors import BudgetInfeasibleError, ConfigError, DesignFailureError, NoPlanError
from .mixing import FiniteMixingDistribution, ideal_matrix, metropolis_weights, rho_monte_carlo
from .planner import (PhasePlan, RhoProfile, budget_window, calibrate_rho_profile,
                      default_budget_grid, default_tau_grid, normalize_phase_lengths,
                      phase_distributions, plan_multi_phase)
from .simulator import SyntheticProblem, make_quadratic_problem, run_simulation
from .topology import Topology, load_topology, make_clique, roofnet_surrogate
from .unicast import design_unicast

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_DESIGN = 0, 2, 3, 4

_TOP_KEYS = {"topology", "mode", "costs", "budget", "convergence", "planner", "simulation", "seed"}
_CONV_KEYS = {"L", "M1", "M2", "sigma_hat", "zeta_hat", "epsilon", "f0", "xi0", "r0", "convex"}
_PLANNER_DEFAULTS = {"max_phases": 2, "budget_points": 25, "tau_points": 20,
                     "samples": 500, "budgets": None}
_SIM_DEFAULTS = {"dim": 20, "hetero": 1.0, "noise": 0.1, "seeds": [0], "epsilon": 1e-3,
                 "eta": 0.1, "max_iterations": 5000, "problem_seed": 0}


@dataclass
class ExperimentConfig:
    topology: Topology
    mode: str
    costs: object
    budget: float | None = None
    convergence: dict = field(default_factory=dict)
    planner: dict = field(default_factory=lambda: dict(_PLANNER_DEFAULTS))
    simulation: dict = field(default_factory=lambda: dict(_SIM_DEFAULTS))
    seed: int = 0


def _number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check_keys(obj, allowed, path, errs):
    for k in obj:
        if k not in allowed:
            errs.append(f"{path}.{k}: unknown field")


def _vector(v, m, path, name, errs):
    """Scalar or length-``m`` list of non-negative numbers."""
    if _number(v):
        vals = [float(v)] * m
    elif isinstance(v, list) and all(_number(x) for x in v):
        if len(v) != m:
            errs.append(f"{path}: expected {m} values, got {len(v)}")
            return None
        vals = [float(x) for x in v]
    else:
        errs.append(f"{path}: must be a number or a list of numbers")
        return None
    if any(x < 0 for x in vals):
        errs.append(f"{path}: {name} must be ≥ 0")
        return None
    return vals


def _parse_topology(obj, errs, base_dir):
    if not isinstance(obj, dict):
        errs.append("topology: must be an object")
        return None
    kind = obj.get("kind")
    if kind == "clique":
        _check_keys(obj, {"kind", "m"}, "topology", errs)
        m = obj.get("m")
        if not isinstance(m, int) or isinstance(m, bool) or m < 1:
            errs.append("topology.m: must be a positive integer")
            return None
        return make_clique(m)
    if kind == "file":
        _check_keys(obj, {"kind", "path"}, "topology", errs)
        path = obj.get("path")
        if not isinstance(path, str):
            errs.append("topology.path: must be a string")
            return None
        full = path if os.path.isabs(path) else os.path.join(base_dir, path)
        if not os.path.exists(full):
            errs.append(f"topology.path: file not found: {path}")
            return None
        try:
            with open(full) as fh:
                return load_topology(fh.read())
        except ValueError as e:
            errs.append(f"topology.path: {e}")
            return None
    if kind == "roofnet":
        _check_keys(obj, {"kind", "seed"}, "topology", errs)
        seed = obj.get("seed", 0)
        if not isinstance(seed, int):
            errs.append("topology.seed: must be an integer")
            return None
        return roofnet_surrogate(seed=seed)
    errs.append(f"topology.kind: must be one of clique, file, roofnet (got {kind!r})")
    return None


def _parse_costs(obj, mode, t, errs):
    if not isinstance(obj, dict):
        errs.append("costs: must be an object")
        return None
    if mode == "broadcast":
        _check_keys(obj, {"comp", "tx"}, "costs", errs)
        for k in ("comp", "tx"):
            if k not in obj:
                errs.append(f"costs.{k}: missing")
        if t is None or any(k not in obj for k in ("comp", "tx")):
            return None
        comp = _vector(obj["comp"], t.m, "costs.comp", "comp", errs)
        tx = _vector(obj["tx"], t.m, "costs.tx", "tx", errs)
        if comp is None or tx is None:
            return None
        return BroadcastCost(comp, tx)
    _check_keys(obj, {"comp", "link"}, "costs", errs)
    for k in ("comp", "link"):
        if k not in obj:
            errs.append(f"costs.{k}: missing")
    if t is None or any(k not in obj for k in ("comp", "link")):
        return None
    comp = _vector(obj["comp"], t.m, "costs.comp", "comp", errs)
    link = obj["link"]
    if comp is None:
        return None
    if _number(link):
        if link < 0:
            errs.append("costs.link: link must be ≥ 0")
            return None
        return UnicastCost.homogeneous(t, comp[0], link) if len(set(comp)) == 1 else \
            UnicastCost(comp, float(link) * t.adjacency_matrix())
    if not isinstance(link, list):
        errs.append("costs.link: must be a number or a list of [u, v, cost] triples")
        return None
    table = {}
    for k, row in enumerate(link):
        if (not isinstance(row, list) or len(row) != 3 or not all(_number(x) for x in row)):
            errs.append(f"costs.link[{k}]: must be [u, v, cost]")
            continue
        u, v, c = int(row[0]), int(row[1]), float(row[2])
        if c < 0:
            errs.append(f"costs.link[{k}]: link must be ≥ 0")
        elif not t.has_edge(u, v):
            errs.append(f"costs.link[{k}]: ({u}, {v}) is not an edge")
        else:
            table[(u, v)] = c
    try:
        return UnicastCost.from_edges(t, comp, table)
    except ValueError as e:
        errs.append(f"costs.link: {e}")
        return None


def _parse_section(obj, defaults, path, errs, checks):
    if obj is None:
        return dict(defaults)
    if not isinstance(obj, dict):
        errs.append(f"{path}: must be an object")
        return dict(defaults)
    _check_keys(obj, set(defaults), path, errs)
    out = dict(defaults)
    out.update({k: v for k, v in obj.items() if k in defaults})
    for key, ok, msg in checks:
        if key in obj and not ok(obj[key]):
            errs.append(f"{path}.{key}: {msg}")
    return out


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _nonneg(v):
    return _number(v) and v >= 0


def _pos(v):
    return _number(v) and v > 0


def parse_experiment_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    """Validate a JSON config, collecting every violation before failing."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"$: malformed JSON: {e}"]) from None
    if not isinstance(obj, dict):
        raise ConfigError(["$: config must be a JSON object"])
    errs = []
    _check_keys(obj, _TOP_KEYS, "$", errs)
    for k in ("topology", "mode", "costs"):
        if k not in obj:
            errs.append(f"$.{k}: missing")
    mode = obj.get("mode")
    if "mode" in obj and mode not in ("broadcast", "unicast"):
        errs.append("mode: must be broadcast or unicast")
        mode = None
    t = _parse_topology(obj["topology"], errs, base_dir) if "topology" in obj else None
    costs = _parse_costs(obj["costs"], mode, t, errs) if "costs" in obj and mode else None

    budget = obj.get("budget")
    if budget is not None and not _nonneg(budget):
        errs.append("budget: must be a non-negative number")

    conv = obj.get("convergence", {})
    if not isinstance(conv, dict):
        errs.append("convergence: must be an object")
        conv = {}
    _check_keys(conv, _CONV_KEYS, "convergence", errs)
    for k, v in conv.items():
        if k == "convex":
            if not isinstance(v, bool):
                errs.append("convergence.convex: must be true or false")
        elif k in _CONV_KEYS and not _nonneg(v):
            errs.append(f"convergence.{k}: must be ≥ 0")
    for k in ("L", "epsilon"):
        if k in conv and _number(conv[k]) and conv[k] <= 0:
            errs.append(f"convergence.{k}: must be > 0")

    planner = _parse_section(obj.get("planner"), _PLANNER_DEFAULTS, "planner", errs, [
        ("max_phases", lambda v: v in (1, 2), "must be 1 or 2"),
        ("budget_points", _pos_int, "must be a positive integer"),
        ("tau_points", _pos_int, "must be a positive integer"),
        ("samples", lambda v: _pos_int(v) and v >= 2, "must be an integer ≥ 2"),
        ("budgets", lambda v: v is None or (isinstance(v, list) and v and all(_nonneg(x) for x in v)),
         "must be a non-empty list of non-negative numbers"),
    ])
    sim = _parse_section(obj.get("simulation"), _SIM_DEFAULTS, "simulation", errs, [
        ("dim", _pos_int, "must be a positive integer"),
        ("hetero", _nonneg, "must be ≥ 0"),
        ("noise", _nonneg, "must be ≥ 0"),
        ("seeds", lambda v: isinstance(v, list) and v and all(isinstance(s, int) for s in v),
         "must be a non-empty list of integers"),
        ("epsilon", _pos, "must be > 0"),
        ("eta", _pos, "must be > 0"),
        ("max_iterations", _pos_int, "must be a positive integer"),
        ("problem_seed", lambda v: isinstance(v, int), "must be an integer"),
    ])
    seed = obj.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        errs.append("seed: must be an integer")
    if errs:
        raise ConfigError(errs)
    return ExperimentConfig(t, mode, costs, budget, dict(conv), planner, sim, seed)


def _problem(cfg: ExperimentConfig) -> SyntheticProblem:
    s = cfg.simulation
    return make_quadratic_problem(cfg.topology.m, s["dim"], s["hetero"], s["noise"],
                                  np.random.default_rng(s["problem_seed"]))


def convergence_params(cfg: ExperimentConfig, problem: SyntheticProblem) -> ConvergenceParams:
    """Bound constants measured on the synthetic problem, overridden by the config."""
    conv = dict(cfg.convergence)
    eps = conv.pop("epsilon", cfg.simulation["epsilon"])
    base = problem.convergence_params(eps, convex=conv.pop("convex", True))
    fields = {k: getattr(base, k) for k in
              ("L", "M1", "M2", "sigma_hat", "zeta_hat", "f0", "xi0", "r0", "m", "convex")}
    fields.update(conv)
    return ConvergenceParams(epsilon=eps, **fields)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)


def _budgets(cfg):
    if cfg.planner["budgets"] is not None:
        return [float(b) for b in cfg.planner["budgets"]]
    return default_budget_grid(cfg.mode, cfg.topology, cfg.costs, cfg.planner["budget_points"])


def _check_budgets(cfg, budgets):
    lo, _ = budget_window(cfg.mode, cfg.topology, cfg.costs)
    bad = [b for b in budgets if b < lo]
    if bad:
        raise BudgetInfeasibleError(f"budgets {bad} are below the largest computation cost {lo}")


def design_broadcast_stage(cfg: ExperimentConfig, out_dir, rng, n=2000) -> dict:
    if cfg.mode != "broadcast":
        raise ConfigError(["mode: design-broadcast needs broadcast mode"])
    budget = cfg.budget if cfg.budget is not None else budget_window("broadcast", cfg.topology, cfg.costs)[1]
    omega = activation_probabilities(cfg.costs, budget)
    est, se = rho_monte_carlo(broadcast_distribution(cfg.topology, omega), n,
                              seed=int(rng.integers(2**63)))
    out = {"budget": budget, "omega": omega.tolist(), "rho_monte_carlo": est, "rho_se": se}
    lo, hi = cfg.costs.window()
    if cfg.costs.is_homogeneous and cfg.topology.n_edges == cfg.topology.m * (cfg.topology.m - 1) // 2 \
            and lo <= budget < hi:
        out["rho_analytic"] = rho_homogeneous_clique(cfg.costs.comp[0], cfg.costs.tx[0], budget)
    _write_json(os.path.join(out_dir, "design_broadcast.json"), out)
    return out


def design_unicast_stage(cfg: ExperimentConfig, out_dir, rng) -> dict:
    if cfg.mode != "unicast":
        raise ConfigError(["mode: design-unicast needs unicast mode"])
    budget = cfg.budget if cfg.budget is not None else budget_window("unicast", cfg.topology, cfg.costs)[1]
    try:
        design = design_unicast(cfg.topology, cfg.costs, budget, rng=rng)
    except DesignFailureError as e:
        if e.result is not None:
            _write_json(os.path.join(out_dir, "design_unicast.json"),
                        {"budget": budget, "rho_history": list(e.result.history), "failed": True})
        raise
    with open(os.path.join(out_dir, "unicast_distribution.json"), "w") as fh:
        fh.write(design.distribution.to_json())
    out = {"budget": budget, "degree": design.degree, "rho": design.rho,
           "rho_history": list(design.history), "support_size": len(design.candidates)}
    _write_json(os.path.join(out_dir, "design_unicast.json"), out)
    return out


def calibrate_stage(cfg: ExperimentConfig, out_dir, rng) -> RhoProfile:
    budgets = _budgets(cfg)
    _check_budgets(cfg, budgets)
    prof = calibrate_rho_profile(cfg.mode, cfg.topology, cfg.costs, budgets,
                                 n=cfg.planner["samples"], rng=rng)
    _write_json(os.path.join(out_dir, "profile.json"), prof.to_dict())
    return prof


def _load_or_calibrate(cfg, out_dir, rng):
    path = os.path.join(out_dir, "profile.json")
    if os.path.exists(path):
        with open(path) as fh:
            return RhoProfile.from_dict(json.load(fh))
    return calibrate_stage(cfg, out_dir, rng)


def plan_stage(cfg: ExperimentConfig, out_dir, rng, profile=None) -> PhasePlan:
    profile = profile or _load_or_calibrate(cfg, out_dir, rng)
    params = convergence_params(cfg, _problem(cfg))
    taus = None
    if cfg.planner["max_phases"] == 2:
        single = plan_multi_phase(1, profile, params)
        taus = default_tau_grid(single.horizon, cfg.planner["tau_points"])
    plan = plan_multi_phase(cfg.planner["max_phases"], profile, params, taus=taus)
    with open(os.path.join(out_dir, "plan.json"), "w") as fh:
        fh.write(plan.to_json())
    return plan


def simulate_stage(cfg: ExperimentConfig, out_dir, rng, plan=None) -> dict:
    """Simulate the plan for every configured seed until the target gap.

    Phase lengths from the bound are rescaled to the iterations a pilot run
    of the final phase actually needs. The always-full-activation schedule
    is run alongside as a baseline.
    """
    if plan is None:
        with open(os.path.join(out_dir, "plan.json")) as fh:
            plan = PhasePlan.from_json(fh.read())
    s = cfg.simulation
    problem = _problem(cfg)
    t, c = cfg.topology, cfg.costs
    eps, T, eta = s["epsilon"], s["max_iterations"], s["eta"]
    design_rng = np.random.default_rng(int(rng.integers(2**63)))
    dense = phase_distributions(plan, cfg.mode, t, c, design_rng)

    pilot = run_simulation(problem, [dense[-1]], eta, T, c, t,
                           np.random.default_rng(s["seeds"][0]), stop_gap=eps)
    t_actual = pilot.first_hit(eps) or T
    if plan.K > 1 and t_actual < plan.horizon:
        plan = normalize_phase_lengths(plan, max(1, t_actual), plan.horizon)
    schedule = [(d, ph.duration) for (d, _), ph in zip(dense, plan.phases)]
    full = [(FiniteMixingDistribution.point_mass(_full_mixing(cfg)), None)]

    runs = []
    for seed in s["seeds"]:
        trace = run_simulation(problem, schedule, eta, T, c, t,
                               np.random.default_rng(seed), stop_gap=eps)
        base = run_simulation(problem, full, eta, T, c, t,
                              np.random.default_rng(seed), stop_gap=eps)
        trace.write_csv(os.path.join(out_dir, f"trace_seed{seed}.csv"))
        base.write_csv(os.path.join(out_dir, f"baseline_seed{seed}.csv"))
        runs.append({"seed": seed, "plan": trace.summary(eps), "baseline": base.summary(eps)})
    out = {
        "plan": json.loads(plan.to_json()),
        "runs": runs,
        "max_per_node_energy": float(np.mean([r["plan"]["max_per_node_energy"] for r in runs])),
        "baseline_max_per_node_energy": float(np.mean([r["baseline"]["max_per_node_energy"] for r in runs])),
        "final_loss": float(np.mean([r["plan"]["final_loss"] for r in runs])),
        "iterations": int(max(r["plan"]["iterations"] for r in runs)),
    }
    _write_json(os.path.join(out_dir, "simulation.json"), out)
    return out


def _full_mixing(cfg):
    """Matrix with every node active: ``J`` on a clique, Metropolis otherwise."""
    t = cfg.topology
    if cfg.mode == "broadcast":
        return metropolis_weights(t, range(t.m))
    if t.n_edges == t.m * (t.m - 1) // 2:
        return ideal_matrix(t.m)
    return metropolis_weights(t, range(t.m))


_STAGE_ERRORS = (
    (BudgetInfeasibleError, "budget-infeasible", EXIT_INFEASIBLE),
    (NoPlanError, "no-plan", EXIT_INFEASIBLE),
    (DesignFailureError, "design-failure", EXIT_DESIGN),
)


def _classify(exc):
    for cls, tag, code in _STAGE_ERRORS:
        if isinstance(exc, cls):
            return tag, code
    return "error", 1


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Full pipeline; the summary records the failing stage on error."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    summary = {"status": "ok"}
    stage = "design"
    try:
        budgets = _budgets(cfg)
        _check_budgets(cfg, budgets)
        if cfg.budget is not None:
            _check_budgets(cfg, [cfg.budget])
        stage = "calibrate"
        profile = calibrate_stage(cfg, out_dir, rng)
        stage = "plan"
        plan = plan_stage(cfg, out_dir, rng, profile)
        stage = "simulate"
        sim = simulate_stage(cfg, out_dir, rng, plan)
        summary.update({
            "max_per_node_energy": sim["max_per_node_energy"],
            "baseline_max_per_node_energy": sim["baseline_max_per_node_energy"],
            "final_loss": sim["final_loss"],
            "T": sim["iterations"],
            "plan": sim["plan"],
        })
    except (BudgetInfeasibleError, NoPlanError, DesignFailureError) as e:
        tag, code = _classify(e)
        summary = {"status": "failed", "error": tag, "stage": stage, "message": str(e),
                   "exit_code": code}
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="energymix", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("design-broadcast", "activation probabilities and divergence for one budget"),
        ("design-unicast", "randomized unicast design for one budget"),
        ("calibrate", "divergence profile over the budget grid"),
        ("plan", "multi-phase budget/duration plan"),
        ("simulate", "D-PSGD simulation of a plan against full activation"),
        ("run", "calibrate, plan and simulate"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--mode", choices=["broadcast", "unicast"], default=None,
                       help="overrides the config cost model")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as e:
        print(f"config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.mode is not None:
        try:
            obj = json.loads(text)
            obj["mode"] = args.mode
            text = json.dumps(obj)
        except (json.JSONDecodeError, TypeError):
            pass
    try:
        cfg = parse_experiment_config(text, base_dir=os.path.dirname(os.path.abspath(args.config)))
    except ConfigError as e:
        for v in e.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)

    if args.command == "run":
        summary = run_experiment(cfg, args.out)
        print(json.dumps(summary, indent=2))
        return EXIT_OK if summary["status"] == "ok" else summary["exit_code"]
    stages = {
        "design-broadcast": lambda: design_broadcast_stage(cfg, args.out, rng),
        "design-unicast": lambda: design_unicast_stage(cfg, args.out, rng),
        "calibrate": lambda: calibrate_stage(cfg, args.out, rng).to_dict(),
        "plan": lambda: json.loads(plan_stage(cfg, args.out, rng).to_json()),
        "simulate": lambda: simulate_stage(cfg, args.out, rng),
    }
    try:
        result = stages[args.command]()
    except ConfigError as e:
        for v in e.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetInfeasibleError, NoPlanError, DesignFailureError) as e:
        tag, code = _classify(e)
        print(f"{tag}: {e}", file=sys.stderr)
        return code
    print(json.dumps(result, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
