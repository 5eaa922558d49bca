"""Experiment configuration: schema, validation, and YAML round-trip.

A configuration file is a YAML mapping with the sections shown in
``examples/experiment.yaml`` (see the repository root): a ``problem``
block, an ``algorithm`` (or a ``sweep`` over several), a ``budget``,
``n_trials``, ``seed``, optional flat ``params`` overrides, optional
``sweep`` axes, and an ``output`` block.  Unknown keys anywhere are
rejected by name.
"""

import math
from dataclasses import asdict, dataclass, field, replace

import yaml

from .drivers import ALGORITHM_IDS, AdvCmaConfig, OuterSettings, ZoPgdaConfig
from .exceptions import InvalidInputError
from .inner import InnerSolverParams
from .problems import make_problem
from .wra import WraParams

PROBLEM_KEYS = {
    "id": "f5",
    "dx": 20,
    "dy": 20,
    "b": 1.0,
    "matrix": "diag",
    "by": 3.0,
    "bounded": True,
    "gamma": 1.0,
}

PARAM_KEYS = {
    # ranking approximation
    "n_pool": None,
    "tau_threshold": 0.7,
    "p_threshold": 0.1,
    "p_plus": 0.4,
    "p_minus": 0.05,
    # inner solvers
    "c_max": 1,
    "v_min_y": 1e-4,
    "t_min": 10,
    "cond_max_y": 1e14,
    "u_min": 1e-5,
    "beta": 0.5,
    "fd_step": 1.49e-8,
    "eta0": 1.0,
    # outer loop
    "popsize": None,
    "v_min_x": 1e-12,
    "cond_max_x": 1e14,
    "success_tol": 1e-6,
    "stop_on_success": False,
    "stagnation": False,
    "stagnation_window": 10,
    "stagnation_tol": 0.01,
    "restarts": False,
    "extra_scenarios": 0,
    # adversarial baseline / local search
    "g_tol": 1e-6,
    "eta_min": 1e-4,
    "sigma_min": 1e-8,
    "inner_budget_per_dim": 10,
    # descent-ascent baseline
    "eta_x": 0.02,
    "eta_y": 0.05,
    "q": 5,
    "mu": 1e-3,
    "zo_restart": False,
    "zo_restart_tol": 1e-5,
}

SWEEP_KEYS = {"algorithm", "b", "dx", "dy", "by", "bounded", "matrix"} | set(
    PARAM_KEYS
)

OUTPUT_KEYS = {"dir": "results", "format": "csv"}

TOP_KEYS = {"problem", "algorithm", "budget", "n_trials", "seed", "params",
            "sweep", "output"}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: dict
    algorithm: str = "wra-cma"
    budget: int = 10_000_000
    n_trials: int = 20
    seed: int = 1
    params: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    output: dict = field(default_factory=lambda: dict(OUTPUT_KEYS))

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **point):
        """A copy with sweep-point values folded into problem/params."""
        problem = dict(self.problem)
        params = dict(self.params)
        algorithm = self.algorithm
        for key, value in point.items():
            if key == "algorithm":
                algorithm = value
            elif key in PROBLEM_KEYS:
                problem[key] = value
            else:
                params[key] = value
        return replace(
            self, problem=problem, params=params, algorithm=algorithm, sweep={}
        )


def _reject_unknown(mapping, allowed, where):
    for key in mapping:
        if key not in allowed:
            raise InvalidInputError(f"unknown key {key!r} in {where}")


def config_from_dict(raw):
    """Validate a parsed mapping into an :class:`ExperimentConfig`."""
    if not isinstance(raw, dict):
        raise InvalidInputError("configuration must be a mapping")
    _reject_unknown(raw, TOP_KEYS, "configuration")

    problem = dict(PROBLEM_KEYS)
    user_problem = raw.get("problem", {}) or {}
    if not isinstance(user_problem, dict):
        raise InvalidInputError("'problem' must be a mapping")
    _reject_unknown(user_problem, set(PROBLEM_KEYS), "problem")
    problem.update(user_problem)

    params = raw.get("params", {}) or {}
    if not isinstance(params, dict):
        raise InvalidInputError("'params' must be a mapping")
    _reject_unknown(params, set(PARAM_KEYS), "params")

    sweep = raw.get("sweep", {}) or {}
    if not isinstance(sweep, dict):
        raise InvalidInputError("'sweep' must be a mapping of lists")
    _reject_unknown(sweep, SWEEP_KEYS, "sweep")
    for key, axis in sweep.items():
        if not isinstance(axis, list) or not axis:
            raise InvalidInputError(f"sweep axis {key!r} must be a non-empty list")

    output = dict(OUTPUT_KEYS)
    user_output = raw.get("output", {}) or {}
    _reject_unknown(user_output, set(OUTPUT_KEYS), "output")
    output.update(user_output)
    if output["format"] not in ("csv", "json"):
        raise InvalidInputError("output format must be 'csv' or 'json'")

    algorithm = raw.get("algorithm", "wra-cma")
    if algorithm not in ALGORITHM_IDS and "algorithm" not in sweep:
        raise InvalidInputError(
            f"unknown algorithm {algorithm!r}; expected one of {ALGORITHM_IDS}"
        )
    n_trials = int(raw.get("n_trials", 20))
    if n_trials < 1:
        raise InvalidInputError("n_trials must be at least 1")
    budget = int(raw.get("budget", 10_000_000))
    if budget < 1:
        raise InvalidInputError("budget must be positive")

    return ExperimentConfig(
        problem=problem,
        algorithm=algorithm,
        budget=budget,
        n_trials=n_trials,
        seed=int(raw.get("seed", 1)),
        params=params,
        sweep=sweep,
        output=output,
    )


def load_config(path):
    """Parse and validate a YAML configuration file.

    Syntax errors surface with the line/column reported by the parser.
    """
    with open(path, "r", encoding="utf-8") as handle:
        try:
            raw = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise InvalidInputError(f"invalid YAML{where}: {exc}") from exc
    return config_from_dict(raw or {})


def dump_config(config, path):
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(config.to_dict(), handle, sort_keys=True)


def sweep_points(config):
    """Deterministic Cartesian product of the sweep axes (sorted keys)."""
    if not config.sweep:
        return [{}]
    keys = sorted(config.sweep)
    points = [{}]
    for key in keys:
        points = [dict(p, **{key: v}) for p in points for v in config.sweep[key]]
    return points


def build_problem(config):
    spec = config.problem
    return make_problem(
        spec["id"], dx=spec["dx"], dy=spec["dy"], b=spec["b"],
        matrix=spec["matrix"], by=spec["by"], bounded=spec["bounded"],
        gamma=spec["gamma"],
    )


def build_run_kwargs(config):
    """Translate flat params into the runner keyword objects."""
    merged = dict(PARAM_KEYS)
    merged.update(config.params)
    inner = InnerSolverParams(
        c_max=int(merged["c_max"]),
        v_min_y=float(merged["v_min_y"]),
        t_min=int(merged["t_min"]),
        cond_max_y=float(merged["cond_max_y"]),
        u_min=float(merged["u_min"]),
        beta=float(merged["beta"]),
        fd_step=float(merged["fd_step"]),
        eta0=float(merged["eta0"]),
    )
    solver_kind = "aga" if config.algorithm.startswith("wra-aga") else "cma"
    wra_params = WraParams(
        tau_threshold=float(merged["tau_threshold"]),
        p_threshold=float(merged["p_threshold"]),
        p_plus=float(merged["p_plus"]),
        p_minus=float(merged["p_minus"]),
        solver_kind=solver_kind,
        inner=inner,
    )
    outer = OuterSettings(
        v_min_x=float(merged["v_min_x"]),
        cond_max_x=float(merged["cond_max_x"]),
        popsize=None if merged["popsize"] is None else int(merged["popsize"]),
        n_pool=None if merged["n_pool"] is None else int(merged["n_pool"]),
        success_tol=float(merged["success_tol"]),
        stop_on_success=bool(merged["stop_on_success"]),
        stagnation=bool(merged["stagnation"]),
        stagnation_window=int(merged["stagnation_window"]),
        stagnation_tol=float(merged["stagnation_tol"]),
    )
    adv = AdvCmaConfig(
        g_tol=float(merged["g_tol"]),
        eta_min=float(merged["eta_min"]),
        sigma_min=float(merged["sigma_min"]),
        inner_budget_per_dim=int(merged["inner_budget_per_dim"]),
        success_tol=float(merged["success_tol"]),
        stop_on_success=bool(merged["stop_on_success"]),
    )
    zo = ZoPgdaConfig(
        eta_x=float(merged["eta_x"]),
        eta_y=float(merged["eta_y"]),
        q=int(merged["q"]),
        mu=float(merged["mu"]),
        restart=bool(merged["zo_restart"]),
        restart_tol=float(merged["zo_restart_tol"]),
        success_tol=float(merged["success_tol"]),
        stop_on_success=bool(merged["stop_on_success"]),
    )
    return {
        "wra_params": wra_params,
        "outer": outer,
        "adv_config": adv,
        "zo_config": zo,
        "restarts": bool(merged["restarts"]),
        "extra_scenarios": int(merged["extra_scenarios"]),
    }
