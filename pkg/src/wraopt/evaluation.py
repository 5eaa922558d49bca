"""Ground-truth certification, success judgment, and batch statistics."""

import math
from dataclasses import dataclass

import numpy as np

from .elitist import multistart_maximize
from .exceptions import InvalidInputError, UnsupportedError
from .problems import Problem

#: success threshold on the worst-case gap |F(z) - F(x*)|
DEFAULT_SUCCESS_TOL = 1e-6


@dataclass(frozen=True)
class ClosedForm:
    """Certification via the analytic worst-case oracle."""


@dataclass(frozen=True)
class Multistart:
    """Certification via repeated elitist maximization runs."""

    n_starts: int = 100
    budget_per_start: int = 2000


def judge_success(problem, z, tol=DEFAULT_SUCCESS_TOL):
    """True when the worst-case gap at ``z`` is within ``tol``."""
    try:
        _, f_star = problem.optimum()
    except UnsupportedError as exc:
        raise UnsupportedError(
            "problem has no solvable optimum; certify instead"
        ) from exc
    return abs(problem.worst_case_value(z) - f_star) <= tol


def certify_worst_case(f, x, y_domain, protocol, rng=None, counter=None):
    """Estimate ``max_y f(x, y)`` under the chosen protocol.

    ``ClosedForm`` requires ``f`` to be a :class:`Problem`;
    ``Multistart`` works on any callable ``f(x, y)`` and returns a lower
    bound of the true maximum (the best of its finitely many runs).
    """
    if isinstance(protocol, ClosedForm):
        if not isinstance(f, Problem):
            raise UnsupportedError("closed-form certification needs a Problem")
        return f.worst_case_value(x)
    if not isinstance(protocol, Multistart):
        raise InvalidInputError(f"unknown certification protocol {protocol!r}")
    if rng is None:
        raise InvalidInputError("multistart certification needs an rng")
    if isinstance(f, Problem):
        problem = f
        objective = lambda y: problem.evaluate(x, y, counter)  # noqa: E731
    else:
        objective = lambda y: float(f(x, y))  # noqa: E731
    _, value = multistart_maximize(
        objective, y_domain, protocol.n_starts, protocol.budget_per_start, rng,
        counter=None if isinstance(f, Problem) else counter,
    )
    return float(value)


@dataclass
class BatchSummary:
    """Success statistics and gap percentile curves for one configuration."""

    n_trials: int
    n_success: int
    median_fcalls: float
    q25_fcalls: float
    q75_fcalls: float
    curve_fcalls: np.ndarray
    curve_gap_q25: np.ndarray
    curve_gap_q50: np.ndarray
    curve_gap_q75: np.ndarray

    @property
    def success_rate(self):
        return self.n_success / self.n_trials if self.n_trials else 0.0


def _locf(grid, fcalls, gaps):
    """Step-function (last observation carried forward) resampling."""
    out = np.empty(grid.shape[0])
    j = 0
    last = math.inf  # before the first log the gap is unknown: pessimistic
    for i, g in enumerate(grid):
        while j < len(fcalls) and fcalls[j] <= g:
            last = gaps[j]
            j += 1
        out[i] = last
    return out


def aggregate(records, grid_points=256):
    """Summarize a homogeneous batch of trial records.

    Quartiles of f-calls-to-success are computed over the successful
    trials with linear interpolation between order statistics; gap curves
    are step-interpolated onto a shared f-call grid and summarized
    pointwise at the 25/50/75 percentiles.
    """
    records = list(records)
    if not records:
        raise InvalidInputError("aggregate needs at least one record")
    keys = {(r.algorithm, tuple(sorted(r.problem.items()))) for r in records}
    if len(keys) > 1:
        raise InvalidInputError("aggregate expects a homogeneous batch")

    to_success = [r.fcalls_to_success for r in records if r.success]
    n_success = len(to_success)
    if n_success:
        med = float(np.percentile(to_success, 50))
        q25 = float(np.percentile(to_success, 25))
        q75 = float(np.percentile(to_success, 75))
    else:
        med = q25 = q75 = math.nan

    traces = [np.asarray(r.trace_fcalls, dtype=np.int64)
              for r in records if r.trace_fcalls]
    all_fcalls = np.unique(np.concatenate(traces)) if traces else np.array([])
    if all_fcalls.size == 0:
        grid = np.array([], dtype=np.int64)
        q25c = q50c = q75c = np.array([])
    else:
        if all_fcalls.size > grid_points:
            idx = np.linspace(0, all_fcalls.size - 1, grid_points).astype(int)
            grid = all_fcalls[np.unique(idx)]
        else:
            grid = all_fcalls
        curves = np.vstack([
            _locf(grid, r.trace_fcalls, r.trace_gap) for r in records
        ])
        finite = np.where(np.isfinite(curves), curves, np.nan)
        with np.errstate(invalid="ignore"):
            q25c = np.nanpercentile(finite, 25, axis=0)
            q50c = np.nanpercentile(finite, 50, axis=0)
            q75c = np.nanpercentile(finite, 75, axis=0)

    return BatchSummary(
        n_trials=len(records),
        n_success=n_success,
        median_fcalls=med,
        q25_fcalls=q25,
        q75_fcalls=q75,
        curve_fcalls=grid,
        curve_gap_q25=q25c,
        curve_gap_q50=q50c,
        curve_gap_q75=q75c,
    )
