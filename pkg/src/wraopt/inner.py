"""Inner maximization solvers driven by the ranking-approximation loop.

Two interchangeable solvers refine a worst-scenario candidate ``yhat`` for
a fixed design vector:

* an inner CMA-ES whose inherited configuration is the pair
  ``(mean, spread matrix)`` with the step size folded into the matrix, and
* approximate gradient ascent (AGA) with a backtracking learning rate,
  whose inherited configuration is the learning rate alone.

Both expose one "round": a loop that runs until the incumbent scenario has
strictly improved ``c_max`` times or the solver raises its dead flag ``h``.
The flag is sticky for the remainder of the current ranking-approximation
call and is cleared only when the per-call state is rebuilt.

Budget gating: every evaluation block first checks the shared f-call
counter against the budget ceiling, so a round can overshoot a ceiling by
at most one block (one population, or one gradient stencil).
"""

from dataclasses import dataclass

import numpy as np

from ._jit import kernel
from .cmaes import (
    _refresh_eig,
    _ask_core,
    _stable_order,
    _tell_core,
    STDDEV_CAP_FRACTION,
    recombination_weights,
    strategy_constants,
    default_popsize,
)
from .exceptions import InvalidInputError
from .problems import _eval_from_cache, _psi
from .rng import Rng

#: absolute cap on loop passes inside one round; a liveness guard for
#: pathological flat objectives where neither improvement nor the spread
#: and conditioning exits would ever fire
ROUND_ITERATION_CAP = 10_000

NO_BUDGET = np.iinfo(np.int64).max


@dataclass(frozen=True)
class InnerSolverParams:
    """Shared inner-solver settings (defaults follow the benchmark setup)."""

    c_max: int = 1
    v_min_y: float = 1e-4
    t_min: int = 10
    cond_max_y: float = 1e14
    u_min: float = 1e-5
    beta: float = 0.5
    fd_step: float = 1.49e-8
    eta0: float = 1.0

    def __post_init__(self):
        if self.c_max < 1:
            raise InvalidInputError("c_max must be at least 1")
        if not 0.0 < self.beta < 1.0:
            raise InvalidInputError("beta must lie in (0, 1)")
        if min(self.v_min_y, self.u_min, self.fd_step, self.eta0) <= 0.0:
            raise InvalidInputError("thresholds must be positive")


class InnerCmaSolver:
    """Per-candidate inner CMA-ES state.

    The inherited configuration carries the full sampling state: mean,
    covariance, step size, both evolution paths, and the lifetime update
    count (the step-size rule is cumulative, so resetting the paths on
    every inheritance would bias the step size downward regardless of
    progress).  Per-call state, rebuilt for every ranking-approximation
    call, is the dead flag, the improvement counter, and the in-call
    iteration count ``t_prime`` that gates the spread-floor exit.
    """

    def __init__(self, config, problem, popsize=None):
        d = problem.dy
        mean, cov, sigma, p_sigma, p_cov, t_total = config
        mean = np.ascontiguousarray(mean, dtype=np.float64)
        cov = np.ascontiguousarray(cov, dtype=np.float64)
        if mean.shape != (d,) or cov.shape != (d, d):
            raise InvalidInputError("configuration dimensions disagree")
        self.dim = d
        self.popsize = popsize if popsize is not None else default_popsize(d)
        self.mean = mean.copy()
        self.cov = 0.5 * (cov + cov.T)
        self.sigma = np.array([float(sigma)])
        self.p_sigma = np.ascontiguousarray(p_sigma, dtype=np.float64).copy()
        self.p_cov = np.ascontiguousarray(p_cov, dtype=np.float64).copy()
        self.t_total = np.array([int(t_total)], dtype=np.int64)
        self.t_prime = np.zeros(1, dtype=np.int64)
        self.h = np.zeros(1, dtype=np.int64)
        self.eig_vals = np.empty(d)
        self.eig_vecs = np.empty((d, d))
        _refresh_eig(self.cov, self.eig_vals, self.eig_vecs)
        self.raw = np.empty((self.popsize, d))
        self.cand = np.empty((self.popsize, d))
        self.weights = recombination_weights(self.popsize)
        self.consts = strategy_constants(d, self.popsize)

    @classmethod
    def fresh(cls, mean, cov, problem, popsize=None):
        """A solver with zeroed paths, unit step size, and zero age."""
        d = problem.dy
        return cls(
            (mean, cov, 1.0, np.zeros(d), np.zeros(d), 0), problem, popsize
        )

    @property
    def dead(self):
        return bool(self.h[0])

    def spread_matrix(self):
        """The sampling covariance with the step size folded in."""
        return float(self.sigma[0]) ** 2 * self.cov

    def omega(self):
        """The inheritable configuration tuple.

        The step size is folded back into the covariance before hand-off
        (an exact refactorization: the whitened path is scale-free and the
        spatial path converts by the same factor), which keeps the stored
        pair well-scaled no matter how far the step size drifted within a
        call.
        """
        s = float(self.sigma[0])
        return (
            self.mean.copy(), s * s * self.cov, 1.0,
            self.p_sigma.copy(), s * self.p_cov, int(self.t_total[0]),
        )


@kernel
def _inner_cma_round(
    pid, phi, z, by, gamma, dystar,
    yhat, fy_box,
    mean, cov, sigma, p_sigma, p_cov, t_total, t_prime, h_flag,
    eig_vals, eig_vecs,
    raw, cand, weights, consts,
    lo, hi, bounded,
    c_max, v_min, t_min, cond_max,
    state, counter, budget,
):
    """One solver round per the inner CMA-ES scheme.

    Loops sample/evaluate/update until ``c_max`` strict improvements of
    the incumbent or the dead flag rises (spread floor reached after the
    minimum iteration count, or conditioning blown, in which case the
    spread is rolled back to its round-entry snapshot).
    """
    d = mean.shape[0]
    lam = raw.shape[0]
    spread_entry = np.empty((d, d))
    s2 = sigma[0] * sigma[0]
    for i in range(d):
        for j in range(d):
            spread_entry[i, j] = s2 * cov[i, j]
    c = 0
    iters = 0
    while c < c_max and h_flag[0] == 0:
        if counter[0] >= budget:
            break
        iters += 1
        if iters > ROUND_ITERATION_CAP:
            h_flag[0] = 1
            break
        _ask_core(mean, eig_vals, eig_vecs, sigma[0], state, raw, cand,
                  lo, hi, bounded)
        fvals = np.empty(lam)
        for k in range(lam):
            fvals[k] = _eval_from_cache(pid, phi, z, cand[k], by, gamma, dystar)
        counter[0] += lam
        k_worst = 0
        for k in range(1, lam):
            if fvals[k] > fvals[k_worst]:
                k_worst = k
        if fvals[k_worst] > fy_box[0]:
            fy_box[0] = fvals[k_worst]
            for i in range(d):
                yhat[i] = cand[k_worst, i]
            c += 1
        order = np.empty(lam, dtype=np.int64)
        _stable_order(fvals, True, order)
        _tell_core(order, raw, weights, consts, mean, cov, sigma,
                   p_sigma, p_cov, t_total, eig_vals, eig_vecs,
                   lo, hi, bounded, STDDEV_CAP_FRACTION)
        max_std = 0.0
        for i in range(d):
            s = sigma[0] * np.sqrt(cov[i, i]) if cov[i, i] > 0.0 else 0.0
            if s > max_std:
                max_std = s
        if max_std < v_min and t_prime[0] >= t_min:
            # floor every coordinate spread at v_min via a two-sided
            # diagonal rescale of the spread matrix
            scale = np.empty(d)
            for i in range(d):
                s = sigma[0] * np.sqrt(cov[i, i]) if cov[i, i] > 0.0 else 0.0
                scale[i] = max(1.0, v_min / s) if s > 0.0 else 1.0
            for i in range(d):
                for j in range(d):
                    cov[i, j] *= scale[i] * scale[j]
            h_flag[0] = 1
            _refresh_eig(cov, eig_vals, eig_vecs)
        cond_ok = eig_vals[0] > 0.0 and eig_vals[d - 1] / eig_vals[0] <= cond_max
        if not cond_ok:
            h_flag[0] = 1
            sigma[0] = 1.0
            for i in range(d):
                for j in range(d):
                    cov[i, j] = spread_entry[i, j]
            _refresh_eig(cov, eig_vals, eig_vecs)
        t_prime[0] += 1
    return c


@kernel
def _aga_round(
    pid, phi, z, by, gamma, dystar,
    yhat, fy_box, eta_box, h_flag,
    lo, hi, bounded,
    c_max, u_min, beta, fd_step,
    counter, budget,
):
    """One solver round per the gradient-ascent scheme.

    Forward-difference gradient at the incumbent, one proposal per
    learning-rate value, backtracking on failure until the proposed move
    falls below ``u_min`` in the max norm (which raises the dead flag).
    """
    d = yhat.shape[0]
    grad = np.empty(d)
    yprop = np.empty(d)
    c = 0
    while c < c_max and h_flag[0] == 0:
        if counter[0] >= budget:
            break
        # gradient stencil: d forward differences off the known incumbent
        finite = True
        for i in range(d):
            step = fd_step * max(1.0, np.abs(yhat[i]))
            for j in range(d):
                yprop[j] = yhat[j]
            yprop[i] += step
            v = _eval_from_cache(pid, phi, z, yprop, by, gamma, dystar)
            counter[0] += 1
            grad[i] = (v - fy_box[0]) / step
            if not np.isfinite(grad[i]):
                finite = False
        if not finite:
            h_flag[0] = 1
            break
        eta = eta_box[0]
        null_move = True
        for j in range(d):
            yprop[j] = yhat[j] + eta * grad[j]
            if bounded:
                yprop[j] = min(max(yprop[j], lo[j]), hi[j])
            if yprop[j] != yhat[j]:
                null_move = False
        if null_move:
            # the projected step is the incumbent itself (gradient points
            # outward in every box-active coordinate): backtracking would
            # only grind down the inherited learning rate, so stop here
            # and keep it
            h_flag[0] = 1
            break
        v = _eval_from_cache(pid, phi, z, yprop, by, gamma, dystar)
        counter[0] += 1
        if v > fy_box[0]:
            eta = eta / beta
        else:
            while v <= fy_box[0] and h_flag[0] == 0:
                if counter[0] >= budget:
                    break
                eta = eta * beta
                move = 0.0
                null_move = True
                for j in range(d):
                    step_j = eta * grad[j]
                    yprop[j] = yhat[j] + step_j
                    if bounded:
                        yprop[j] = min(max(yprop[j], lo[j]), hi[j])
                    if np.abs(step_j) > move:
                        move = np.abs(step_j)
                    if yprop[j] != yhat[j]:
                        null_move = False
                if null_move:
                    h_flag[0] = 1
                    break
                if move <= u_min:
                    h_flag[0] = 1
                v = _eval_from_cache(pid, phi, z, yprop, by, gamma, dystar)
                counter[0] += 1
        if v > fy_box[0]:
            fy_box[0] = v
            for j in range(d):
                yhat[j] = yprop[j]
            c += 1
        eta_box[0] = eta
    return c


def _problem_cache(problem, x):
    z, phi = problem._zcache(x)
    return z, phi


def cma_inner_round(
    problem, x, yhat, f_y, solver, params, rng, counter, budget=None, _cache=None,
):
    """Run one inner CMA-ES round for design vector ``x``.

    Mutates ``solver`` (state threads across rounds within one ranking
    approximation call) and returns ``(f_y', yhat')`` with
    ``f_y' >= f_y``.  A dead solver returns its inputs at zero cost.
    """
    z, phi = _problem_cache(problem, x) if _cache is None else _cache
    yhat = np.ascontiguousarray(yhat, dtype=np.float64).copy()
    fy_box = np.array([float(f_y)])
    dom = problem.y_domain
    _inner_cma_round(
        problem.index, phi, z, problem.by, problem.gamma, problem.dy_star,
        yhat, fy_box,
        solver.mean, solver.cov, solver.sigma, solver.p_sigma, solver.p_cov,
        solver.t_total, solver.t_prime, solver.h, solver.eig_vals,
        solver.eig_vecs,
        solver.raw, solver.cand, solver.weights, solver.consts,
        dom.lower, dom.upper, problem.bounded,
        params.c_max, params.v_min_y, params.t_min, params.cond_max_y,
        rng.state, counter.array, NO_BUDGET if budget is None else int(budget),
    )
    return float(fy_box[0]), yhat


def aga_inner_round(
    problem, x, yhat, f_y, eta, h, params, counter, budget=None, _cache=None,
):
    """Run one gradient-ascent round; returns ``(f_y', yhat', eta', h')``."""
    z, phi = _problem_cache(problem, x) if _cache is None else _cache
    yhat = np.ascontiguousarray(yhat, dtype=np.float64).copy()
    fy_box = np.array([float(f_y)])
    eta_box = np.array([float(eta)])
    h_flag = np.array([1 if h else 0], dtype=np.int64)
    dom = problem.y_domain
    _aga_round(
        problem.index, phi, z, problem.by, problem.gamma, problem.dy_star,
        yhat, fy_box, eta_box, h_flag,
        dom.lower, dom.upper, problem.bounded,
        params.c_max, params.u_min, params.beta, params.fd_step,
        counter.array, NO_BUDGET if budget is None else int(budget),
    )
    return float(fy_box[0]), yhat, float(eta_box[0]), bool(h_flag[0])


def finite_difference_gradient(objective, y, base_value, step, counter=None):
    """Forward-difference gradient reusing a known base value.

    Costs exactly ``len(y)`` evaluations.
    """
    if step <= 0.0:
        raise InvalidInputError("step must be positive")
    y = np.ascontiguousarray(y, dtype=np.float64)
    grad = np.empty_like(y)
    for i in range(y.shape[0]):
        probe = y.copy()
        probe[i] += step
        v = float(objective(probe))
        if counter is not None:
            counter.add(1)
        grad[i] = (v - base_value) / step
    return grad
