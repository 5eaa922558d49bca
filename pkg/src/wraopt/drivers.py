"""Top-level min-max drivers and trial records.

Runners (one per algorithm identifier):

* ``wra-cma`` / ``wra-aga``: outer CMA-ES on the worst-case objective with
  the ranking-approximation mechanism supplying candidate orderings;
* ``adv-cma``: the alternating baseline that tracks approximate best
  responses with two warm-started (1+1)-CMA-ES searches;
* ``zopgda``: zeroth-order projected gradient descent-ascent with
  random-direction gradient estimates;
* ``wra-cma+adv`` / ``wra-aga+adv``: the ranking-approximation runners
  with a best-response local-search phase after each internal
  termination, then a restart.

Every runner produces a :class:`TrialRecord` whose trace logs
``(fcalls, iteration, gap, best approximated worst-case value, restarts)``
per outer iteration (long runs are thinned to a bounded number of rows;
the success crossing is always captured exactly).  Gaps are measured with
the closed-form worst-case oracle, which costs no f-calls; evaluations
spent on final archive certification are tracked on a separate counter.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._jit import kernel
from .cmaes import PopulationCma, mirror_into_box
from .elitist import ElitistCma, _elitist_propose, _elitist_update, elitist_constants
from .exceptions import InvalidInputError
from .linalg import _cholesky_lower
from .problems import (
    EvalCounter,
    _bt_x,
    _eval_from_cache,
    _phi,
    _psi,
    _worst_y,
)
from .rng import Rng, _next_double, _next_normal, derive_seed
from .wra import WraParams, pool_init, wra_approximate

DEFAULT_BUDGET = 10_000_000
SUCCESS_TOL = 1e-6


# ---------------------------------------------------------------------------
# configuration objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OuterSettings:
    """Outer-loop settings shared by the ranking-approximation runners."""

    v_min_x: float = 1e-12
    cond_max_x: float = 1e14
    popsize: int = None
    n_pool: int = None  # defaults to 3 * popsize
    success_tol: float = SUCCESS_TOL
    stop_on_success: bool = False
    stagnation: bool = False
    stagnation_window: int = 10
    stagnation_tol: float = 0.01
    max_trace_rows: int = 4096


@dataclass(frozen=True)
class AdvCmaConfig:
    """Alternating best-response baseline settings."""

    g_tol: float = 1e-6
    eta_min: float = 1e-4
    sigma_min: float = 1e-8
    inner_budget_per_dim: int = 10
    eta0: float = 1.0
    eta_grow: float = 1.1
    eta_shrink: float = 0.7
    success_tol: float = SUCCESS_TOL
    stop_on_success: bool = False
    max_trace_rows: int = 4096


@dataclass(frozen=True)
class ZoPgdaConfig:
    """Zeroth-order projected gradient descent-ascent settings."""

    eta_x: float = 0.02
    eta_y: float = 0.05
    q: int = 5
    mu: float = 1e-3
    restart: bool = False
    restart_tol: float = 1e-5
    success_tol: float = SUCCESS_TOL
    stop_on_success: bool = False
    max_trace_rows: int = 4096

    def __post_init__(self):
        if self.q < 1 or self.mu <= 0.0:
            raise InvalidInputError("need q >= 1 and mu > 0")


@dataclass
class RestartArchive:
    """Candidate/scenario archives accumulated across restarts."""

    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)

    def extend(self, xs, ys):
        for x in xs:
            self.xs.append(np.array(x, dtype=np.float64))
        for y in ys:
            self.ys.append(np.array(y, dtype=np.float64))


@dataclass
class TrialRecord:
    """One optimization run: configuration, trace, and outcome."""

    algorithm: str
    problem: dict
    seed: int
    budget: int
    trace_fcalls: list = field(default_factory=list)
    trace_iteration: list = field(default_factory=list)
    trace_gap: list = field(default_factory=list)
    trace_best_approx: list = field(default_factory=list)
    trace_restarts: list = field(default_factory=list)
    restarts: int = 0
    final_x: np.ndarray = None
    success: bool = False
    fcalls_to_success: int = None
    fcalls_total: int = 0
    cert_fcalls: int = 0
    termination: str = "budget"
    wall_time: float = 0.0
    # non-serialized state handed to restart/hybrid wrappers
    population: np.ndarray = field(default=None, repr=False)
    scenarios: np.ndarray = field(default=None, repr=False)
    pool: object = field(default=None, repr=False)
    outer_mean: np.ndarray = field(default=None, repr=False)
    outer_spread: np.ndarray = field(default=None, repr=False)
    final_scenario: np.ndarray = field(default=None, repr=False)

    def log(self, fcalls, iteration, gap, best_approx, restarts):
        self.trace_fcalls.append(int(fcalls))
        self.trace_iteration.append(int(iteration))
        self.trace_gap.append(float(gap))
        self.trace_best_approx.append(float(best_approx))
        self.trace_restarts.append(int(restarts))

    def mark_success(self, fcalls):
        if not self.success:
            self.success = True
            self.fcalls_to_success = int(fcalls)

    def rows(self):
        return zip(
            self.trace_fcalls, self.trace_iteration, self.trace_gap,
            self.trace_best_approx, self.trace_restarts,
        )


def problem_descriptor(problem):
    return {
        "id": problem.name,
        "dx": problem.dx,
        "dy": problem.dy,
        "b": problem.matrix.value,
        "matrix": problem.matrix.kind,
        "by": problem.by,
        "bounded": problem.bounded,
        "gamma": problem.gamma,
    }


def _thin_trace(record, max_rows):
    """Keep every other row (never the last) once the trace overflows."""
    if len(record.trace_fcalls) <= max_rows:
        return
    for name in ("trace_fcalls", "trace_iteration", "trace_gap",
                 "trace_best_approx", "trace_restarts"):
        rows = getattr(record, name)
        setattr(record, name, rows[0:-1:2] + rows[-1:])


# ---------------------------------------------------------------------------
# ranking-approximation runners
# ---------------------------------------------------------------------------


def _gap_point(problem, mean):
    if problem.bounded:
        return mirror_into_box(mean, problem.x_domain)
    return np.asarray(mean, dtype=np.float64)


def run_wra(
    problem,
    solver_kind="cma",
    budget=DEFAULT_BUDGET,
    seed=0,
    wra_params=None,
    outer=None,
    counter=None,
    restart_index=0,
    rng=None,
):
    """One ranking-approximation run (no restarts).

    ``counter`` may be shared by a restart wrapper; ``budget`` is the
    absolute ceiling on that counter.
    """
    outer = outer or OuterSettings()
    if wra_params is None:
        wra_params = WraParams(solver_kind=solver_kind)
    elif wra_params.solver_kind != solver_kind:
        wra_params = replace(wra_params, solver_kind=solver_kind)
    counter = counter if counter is not None else EvalCounter()
    rng = rng if rng is not None else Rng(seed)

    record = TrialRecord(
        algorithm=f"wra-{solver_kind}",
        problem=problem_descriptor(problem),
        seed=seed,
        budget=int(budget),
        restarts=restart_index,
    )
    t0 = time.perf_counter()

    x_star, f_star = problem.optimum()
    x_dom = problem.x_domain
    mean0 = x_dom.sample_uniform(rng)
    cov0 = np.diag(((x_dom.upper - x_dom.lower) / 4.0) ** 2)
    es = PopulationCma(
        mean0, cov0,
        domain=x_dom if problem.bounded else None,
        popsize=outer.popsize,
    )
    n_pool = outer.n_pool if outer.n_pool is not None else 3 * es.popsize
    pool = pool_init(n_pool, problem, wra_params, rng)
    warm_cost = es.popsize * n_pool

    best_approx_history = []
    candidates = np.empty((0, problem.dx))
    record.termination = "budget"
    while True:
        if counter.n + warm_cost > budget:
            record.termination = "budget"
            break
        candidates = es.ask(rng)
        outcome, pool = wra_approximate(
            pool, candidates, wra_params, problem, rng, counter, budget=budget
        )
        es.tell(outcome.rankings)

        z = _gap_point(problem, es.mean)
        gap = abs(problem.worst_case_value(z) - f_star)
        best_approx = float(np.min(outcome.approx_values))
        best_approx_history.append(best_approx)
        record.log(counter.n, es.iteration, gap, best_approx, restart_index)
        _thin_trace(record, outer.max_trace_rows)
        if gap <= outer.success_tol:
            record.mark_success(counter.n)
            if outer.stop_on_success:
                record.termination = "success_stop"
                break

        reason = es.should_terminate(outer.v_min_x, outer.cond_max_x)
        if reason is not None:
            record.termination = reason.value
            break
        if outer.stagnation and len(best_approx_history) > outer.stagnation_window:
            window = best_approx_history[-(outer.stagnation_window + 1):]
            if max(window) - min(window) < outer.stagnation_tol:
                record.termination = "stagnation"
                break

    record.final_x = _gap_point(problem, es.mean)
    record.fcalls_total = counter.n
    record.population = candidates.copy()
    record.scenarios = pool.ys.copy()
    record.pool = pool
    record.outer_mean = es.mean.copy()
    record.outer_spread = es.step_size**2 * es.cov
    record.wall_time = time.perf_counter() - t0
    return record


# ---------------------------------------------------------------------------
# zeroth-order projected gradient descent-ascent
# ---------------------------------------------------------------------------


def zo_gradient(f_slice, v, q, mu, rng, counter=None):
    """Random-direction gradient estimate ``(dim/(q mu)) sum (f(v+mu u)-f(v)) u``.

    Directions are uniform on the unit sphere (dim normals each,
    normalized); costs exactly ``q + 1`` evaluations.
    """
    if q < 1 or mu <= 0.0:
        raise InvalidInputError("need q >= 1 and mu > 0")
    v = np.ascontiguousarray(v, dtype=np.float64)
    d = v.shape[0]
    f0 = float(f_slice(v.copy()))
    if counter is not None:
        counter.add(1)
    est = np.zeros(d)
    for _ in range(q):
        u = rng.normals(d)
        u /= np.linalg.norm(u)
        fv = float(f_slice(v + mu * u))
        if counter is not None:
            counter.add(1)
        est += (fv - f0) * u
    return est * (d / (q * mu))


@kernel
def _zo_slice_gradient(
    pid, bmat, diag_value, by, gamma, alpha, dystar,
    x, y, wrt_x, q, mu, state, counter, zbuf, grad,
):
    """In-kernel sphere-sampling gradient of f along x or y; q+1 f-calls."""
    dx = x.shape[0]
    dy = y.shape[0]
    d = dx if wrt_x else dy
    _bt_x(bmat, diag_value, x, zbuf)
    phi = _phi(pid, x, zbuf, by, gamma, alpha)
    f0 = phi + _psi(pid, zbuf, y, by, gamma, dystar)
    counter[0] += 1
    for i in range(d):
        grad[i] = 0.0
    u = np.empty(d)
    probe_x = np.empty(dx)
    probe_y = np.empty(dy)
    for _ in range(q):
        norm = 0.0
        for i in range(d):
            u[i] = _next_normal(state)
            norm += u[i] * u[i]
        norm = np.sqrt(norm)
        if norm == 0.0:
            continue
        for i in range(d):
            u[i] /= norm
        if wrt_x:
            for i in range(dx):
                probe_x[i] = x[i] + mu * u[i]
            _bt_x(bmat, diag_value, probe_x, zbuf)
            fv = _phi(pid, probe_x, zbuf, by, gamma, alpha) + _psi(
                pid, zbuf, y, by, gamma, dystar
            )
        else:
            for i in range(dy):
                probe_y[i] = y[i] + mu * u[i]
            fv = phi + _psi(pid, zbuf, probe_y, by, gamma, dystar)
        counter[0] += 1
        diff = fv - f0
        for i in range(d):
            grad[i] += diff * u[i]
    scale = d / (q * mu)
    for i in range(d):
        grad[i] *= scale
    return f0


@kernel
def _worst_value_of(pid, bmat, diag_value, by, gamma, alpha, dystar, bounded,
                    x, zbuf, ybuf):
    _bt_x(bmat, diag_value, x, zbuf)
    phi = _phi(pid, x, zbuf, by, gamma, alpha)
    _worst_y(pid, zbuf, by, dystar, bounded, ybuf)
    return phi + _psi(pid, zbuf, ybuf, by, gamma, dystar)


@kernel
def _zopgda_run(
    pid, bmat, diag_value, by, gamma, alpha, dystar, bounded,
    x, y, xlo, xhi, ylo, yhi,
    eta_x, eta_y, q, mu,
    restart_on, restart_tol,
    f_star, success_tol, stop_on_success,
    state, counter, budget, stride,
    log_fcalls, log_iter, log_gap, log_bestf, log_restarts,
):
    """Full descent-ascent loop; returns (rows, first_success, iters, restarts)."""
    dx = x.shape[0]
    dy = y.shape[0]
    zbuf = np.empty(dy)
    ybuf = np.empty(dy)
    gx = np.empty(dx)
    gy = np.empty(dy)
    rows = 0
    iters = 0
    restarts = 0
    first_success = np.int64(-1)
    max_rows = log_fcalls.shape[0]
    while counter[0] < budget:
        f0 = _zo_slice_gradient(pid, bmat, diag_value, by, gamma, alpha, dystar,
                                x, y, True, q, mu, state, counter, zbuf, gx)
        _zo_slice_gradient(pid, bmat, diag_value, by, gamma, alpha, dystar,
                           x, y, False, q, mu, state, counter, zbuf, gy)
        for i in range(dx):
            x[i] = x[i] - eta_x * gx[i]
            if bounded:
                x[i] = min(max(x[i], xlo[i]), xhi[i])
        for i in range(dy):
            y[i] = y[i] + eta_y * gy[i]
            if bounded:
                y[i] = min(max(y[i], ylo[i]), yhi[i])
        iters += 1

        gap = np.abs(
            _worst_value_of(pid, bmat, diag_value, by, gamma, alpha, dystar,
                            bounded, x, zbuf, ybuf) - f_star
        )
        if gap <= success_tol and first_success < 0:
            first_success = counter[0]
            if rows < max_rows:
                log_fcalls[rows] = counter[0]
                log_iter[rows] = iters
                log_gap[rows] = gap
                log_bestf[rows] = f0
                log_restarts[rows] = restarts
                rows += 1
            if stop_on_success:
                break
        elif iters % stride == 0 and rows < max_rows:
            log_fcalls[rows] = counter[0]
            log_iter[rows] = iters
            log_gap[rows] = gap
            log_bestf[rows] = f0
            log_restarts[rows] = restarts
            rows += 1

        if restart_on:
            size = 0.0
            for i in range(dx):
                size += (eta_x * gx[i]) ** 2
            for i in range(dy):
                size += (eta_y * gy[i]) ** 2
            if size <= restart_tol:
                for i in range(dx):
                    x[i] = xlo[i] + (xhi[i] - xlo[i]) * _next_double(state)
                for i in range(dy):
                    y[i] = ylo[i] + (yhi[i] - ylo[i]) * _next_double(state)
                restarts += 1
    return rows, first_success, iters, restarts


def run_zopgda(problem, config=None, budget=DEFAULT_BUDGET, seed=0, counter=None):
    """Zeroth-order projected gradient descent-ascent trial."""
    config = config or ZoPgdaConfig()
    counter = counter if counter is not None else EvalCounter()
    rng = Rng(seed)
    record = TrialRecord(
        algorithm="zopgda",
        problem=problem_descriptor(problem),
        seed=seed,
        budget=int(budget),
    )
    t0 = time.perf_counter()
    _, f_star = problem.optimum()
    x = problem.x_domain.sample_uniform(rng)
    y = problem.y_domain.sample_uniform(rng)

    est_iters = max(1, (int(budget) - counter.n) // (2 * (config.q + 1)))
    stride = max(1, est_iters // (config.max_trace_rows // 2))
    max_rows = config.max_trace_rows + 4
    log_fcalls = np.zeros(max_rows, dtype=np.int64)
    log_iter = np.zeros(max_rows, dtype=np.int64)
    log_gap = np.zeros(max_rows)
    log_bestf = np.zeros(max_rows)
    log_restarts = np.zeros(max_rows, dtype=np.int64)

    rows, first_success, iters, restarts = _zopgda_run(
        problem.index, problem.b_dense, problem.diag_value, problem.by,
        problem.gamma, problem.alpha, problem.dy_star, problem.bounded,
        x, y,
        problem.x_domain.lower, problem.x_domain.upper,
        problem.y_domain.lower, problem.y_domain.upper,
        config.eta_x, config.eta_y, config.q, config.mu,
        config.restart, config.restart_tol,
        f_star, config.success_tol, config.stop_on_success,
        rng.state, counter.array, int(budget), stride,
        log_fcalls, log_iter, log_gap, log_bestf, log_restarts,
    )
    for r in range(rows):
        record.log(log_fcalls[r], log_iter[r], log_gap[r], log_bestf[r],
                   log_restarts[r])
    if first_success >= 0:
        record.mark_success(first_success)
        if config.stop_on_success:
            record.termination = "success_stop"
    record.restarts = int(restarts)
    record.final_x = x
    record.fcalls_total = counter.n
    record.wall_time = time.perf_counter() - t0
    return record


# ---------------------------------------------------------------------------
# adversarial best-response baseline
# ---------------------------------------------------------------------------


@kernel
def _elitist_run_slice(
    pid, bmat, diag_value, by, gamma, alpha, dystar,
    fixed, wrt_x, maximize,
    incumbent, value_box, cov, chol, sigma, p_succ, path, consts,
    lo, hi, bounded, state, counter, budget, n_steps, raw, cand,
):
    """n_steps of (1+1) search along one side of f with the other fixed."""
    dy = bmat.shape[1]
    zbuf = np.empty(dy)
    if not wrt_x:
        _bt_x(bmat, diag_value, fixed, zbuf)
        phi = _phi(pid, fixed, zbuf, by, gamma, alpha)
    else:
        phi = 0.0
    steps = 0
    for _ in range(n_steps):
        if counter[0] >= budget:
            break
        _elitist_propose(incumbent, chol, sigma, state, lo, hi, bounded, raw, cand)
        if wrt_x:
            _bt_x(bmat, diag_value, cand, zbuf)
            v = _phi(pid, cand, zbuf, by, gamma, alpha) + _psi(
                pid, zbuf, fixed, by, gamma, dystar
            )
        else:
            v = phi + _psi(pid, zbuf, cand, by, gamma, dystar)
        counter[0] += 1
        steps += 1
        if maximize:
            success = v > value_box[0]
        else:
            success = v < value_box[0]
        _elitist_update(incumbent, value_box, cov, chol, sigma, p_succ, path,
                        consts, cand, v, success)
    return steps


class _SliceSearch:
    """Warm-started (1+1) search state bound to one side of the objective."""

    def __init__(self, problem, start, value, cov, sigma, wrt_x, maximize):
        d = start.shape[0]
        self.problem = problem
        self.wrt_x = wrt_x
        self.maximize = maximize
        self.incumbent = start.copy()
        self.value_box = np.array([float(value)])
        self.cov = cov.copy()
        self.chol = np.empty_like(self.cov)
        if _cholesky_lower(self.cov, self.chol) != 0:
            raise InvalidInputError("slice covariance not positive definite")
        self.sigma = np.array([float(sigma)])
        self.p_succ = np.array([2.0 / 11.0])
        self.path = np.zeros(d)
        self.consts = elitist_constants(d)
        self.raw = np.empty(d)
        self.cand = np.empty(d)
        dom = problem.x_domain if wrt_x else problem.y_domain
        self.lo = dom.lower
        self.hi = dom.upper

    def run(self, fixed, steps, rng, counter, budget):
        p = self.problem
        return _elitist_run_slice(
            p.index, p.b_dense, p.diag_value, p.by, p.gamma, p.alpha, p.dy_star,
            fixed, self.wrt_x, self.maximize,
            self.incumbent, self.value_box, self.cov, self.chol, self.sigma,
            self.p_succ, self.path, self.consts,
            self.lo, self.hi, p.bounded, rng.state, counter.array,
            int(budget), int(steps), self.raw, self.cand,
        )

    @property
    def value(self):
        return float(self.value_box[0])

    @property
    def step_size(self):
        return float(self.sigma[0])


def run_adversarial_cmaes(
    problem, config=None, budget=DEFAULT_BUDGET, seed=0, counter=None,
    archive=None,
):
    """Alternating best-response baseline with learning-rate adaptation.

    Both sides share one multiplicatively adapted learning rate, clamped
    to ``[eta_min, 1]``: it grows after an iteration that improved the
    pessimistic progress measure ``max(f(x, ybar), -f(xbar, y))`` and
    shrinks otherwise.  The run restarts from fresh uniform points when
    the update vectors stall below ``g_tol`` or either search collapses.
    """
    config = config or AdvCmaConfig()
    counter = counter if counter is not None else EvalCounter()
    rng = Rng(seed)
    archive = archive if archive is not None else RestartArchive()
    record = TrialRecord(
        algorithm="adv-cma",
        problem=problem_descriptor(problem),
        seed=seed,
        budget=int(budget),
    )
    t0 = time.perf_counter()
    _, f_star = problem.optimum()
    zbuf = np.empty(problem.dy)
    ybuf = np.empty(problem.dy)

    def gap_at(x):
        return abs(
            float(
                _worst_value_of(
                    problem.index, problem.b_dense, problem.diag_value,
                    problem.by, problem.gamma, problem.alpha, problem.dy_star,
                    problem.bounded, x, zbuf, ybuf,
                )
            )
            - f_star
        )

    x_cov0 = np.diag(((problem.x_domain.upper - problem.x_domain.lower) / 4.0) ** 2)
    y_cov0 = (problem.by / 2.0) ** 2 * np.eye(problem.dy)
    inner_steps_x = config.inner_budget_per_dim * problem.dx
    inner_steps_y = config.inner_budget_per_dim * problem.dy

    def fresh_state():
        x = problem.x_domain.sample_uniform(rng)
        y = problem.y_domain.sample_uniform(rng)
        fxy = problem.evaluate(x, y, counter)
        sx = _SliceSearch(problem, x, fxy, x_cov0, 1.0, wrt_x=True, maximize=False)
        sy = _SliceSearch(problem, y, fxy, y_cov0, 1.0, wrt_x=False, maximize=True)
        return x, y, sx, sy

    x, y, sx, sy = fresh_state()
    eta = config.eta0
    measure_prev = math.inf
    restarts = 0
    iters = 0
    est_iters = max(1, int(budget) // (2 * (1 + config.inner_budget_per_dim * problem.dx)))
    stride = max(1, est_iters // (config.max_trace_rows // 2))
    record.termination = "budget"
    while counter.n < budget:
        # refresh incumbent values under the current opponents, then track
        sx.value_box[0] = problem.evaluate(sx.incumbent, y, counter)
        sx.run(y, inner_steps_x, rng, counter, budget)
        sy.value_box[0] = problem.evaluate(x, sy.incumbent, counter)
        sy.run(x, inner_steps_y, rng, counter, budget)
        x_bar = sx.incumbent.copy()
        y_bar = sy.incumbent.copy()

        b_x = x_bar - x
        b_y = y_bar - y
        x = x + eta * b_x
        y = y + eta * b_y
        iters += 1

        measure = max(sy.value, -sx.value)
        if measure < measure_prev:
            eta = min(eta * config.eta_grow, 1.0)
        else:
            eta = max(eta * config.eta_shrink, config.eta_min)
        measure_prev = measure

        gap = gap_at(x)
        crossed = gap <= config.success_tol and not record.success
        if crossed:
            record.mark_success(counter.n)
        if crossed or iters % stride == 0:
            record.log(counter.n, iters, gap, measure, restarts)
            _thin_trace(record, config.max_trace_rows)
        if record.success and config.stop_on_success:
            record.termination = "success_stop"
            break

        stalled = (
            eta * eta * (float(b_x @ b_x) + float(b_y @ b_y)) < config.g_tol
            or min(sx.step_size, sy.step_size) < config.sigma_min
        )
        if stalled and counter.n < budget:
            archive.extend([x.copy(), x_bar], [y.copy(), y_bar])
            x, y, sx, sy = fresh_state()
            eta = config.eta0
            measure_prev = math.inf
            restarts += 1

    archive.extend([x.copy(), sx.incumbent.copy()], [y.copy(), sy.incumbent.copy()])
    record.restarts = restarts
    record.final_x = x
    record.fcalls_total = counter.n
    record.wall_time = time.perf_counter() - t0
    return record


# ---------------------------------------------------------------------------
# restart wrapper and archive certification
# ---------------------------------------------------------------------------


def archive_minmax_pick(problem, archive, cert_counter, extra_scenarios=0, rng=None):
    """Best archived candidate under the archived (plus optional random)
    scenarios: argmin over stored x of max over stored y of f(x, y).

    Evaluations land on ``cert_counter`` (certification, not optimization).
    """
    if not archive.xs:
        return None, math.inf
    ys = list(archive.ys)
    if extra_scenarios > 0:
        draw = rng if rng is not None else Rng(0)
        for _ in range(int(extra_scenarios)):
            ys.append(problem.y_domain.sample_uniform(draw))
    best_x, best_val = None, math.inf
    for x in archive.xs:
        worst = -math.inf
        for y in ys:
            worst = max(worst, problem.evaluate(x, y, cert_counter))
        if worst < best_val:
            best_val = worst
            best_x = x
    return best_x, best_val


def _merge_segment(merged, segment):
    for row in segment.rows():
        merged.log(*row)
    if segment.success and not merged.success:
        merged.mark_success(segment.fcalls_to_success)
    merged.termination = segment.termination
    merged.final_x = segment.final_x


def run_with_restarts(
    problem, runner, budget=DEFAULT_BUDGET, seed=0, algorithm="restarted",
    extra_scenarios=0,
):
    """Drive ``runner`` to the budget, restarting after internal stops.

    ``runner(seed, counter, restart_index)`` must return a
    :class:`TrialRecord` exposing ``population`` and ``scenarios``; each
    segment's final state is archived and the final answer is the
    archive's min-max pick (certified on a separate counter).

    Returns ``(record, archive, final_x)``.
    """
    counter = EvalCounter()
    cert = EvalCounter()
    archive = RestartArchive()
    merged = TrialRecord(
        algorithm=algorithm,
        problem=problem_descriptor(problem),
        seed=seed,
        budget=int(budget),
    )
    t0 = time.perf_counter()
    restart_index = 0
    while counter.n < budget:
        rec = runner(derive_seed(seed, restart_index), counter, restart_index)
        _merge_segment(merged, rec)
        if rec.population is not None and len(rec.population):
            archive.extend(rec.population, rec.scenarios)
        if rec.termination in ("budget", "success_stop"):
            break
        restart_index += 1
    merged.restarts = restart_index
    final_x, _ = archive_minmax_pick(
        problem, archive, cert, extra_scenarios,
        Rng(derive_seed(seed, 0xA5C)),
    )
    if final_x is not None:
        merged.final_x = final_x
    merged.fcalls_total = counter.n
    merged.cert_fcalls = cert.n
    merged.wall_time = time.perf_counter() - t0
    return merged, archive, merged.final_x


# ---------------------------------------------------------------------------
# best-response local search on a frozen scenario set
# ---------------------------------------------------------------------------


def local_search_hybrid(
    problem, wra_record, adv_config=None, budget=DEFAULT_BUDGET, seed=0,
    counter=None,
):
    """Refine a finished ranking-approximation run by alternating
    best-response search on the pessimistic surrogate
    ``f_Y(x, y) = max over {y} and the frozen scenario set of f(x, .)``.

    Starts from the best-case candidate of the final population and its
    most adversarial pool scenario; the search distributions inherit the
    outer state on the x side and the winning slot's configuration
    (ranking solver) or a deliberately small sphere (gradient solver) on
    the y side.  One surrogate evaluation costs ``len(scenarios) + 1``
    f-calls, all charged to the optimization counter.
    """
    adv_config = adv_config or AdvCmaConfig()
    counter = counter if counter is not None else EvalCounter()
    rng = Rng(seed)
    record = TrialRecord(
        algorithm="local-search",
        problem=problem_descriptor(problem),
        seed=seed,
        budget=int(budget),
    )
    t0 = time.perf_counter()
    record.termination = "budget"
    population = wra_record.population
    pool = wra_record.pool
    if population is None or len(population) == 0 or counter.n >= budget:
        record.final_x = wra_record.final_x
        record.fcalls_total = counter.n
        record.wall_time = time.perf_counter() - t0
        return record

    scenarios = pool.ys.copy()
    n_scen = scenarios.shape[0]

    def f_surrogate(x, y):
        best = problem.evaluate(x, y, counter)
        for k in range(n_scen):
            best = max(best, problem.evaluate(x, scenarios[k], counter))
        return best

    # pick the best-case candidate and its worst frozen scenario
    vals = np.array(
        [[problem.evaluate(x, scenarios[k], counter) for k in range(n_scen)]
         for x in population]
    )
    worst_per_cand = vals.max(axis=1)
    i_adv = int(np.argmin(worst_per_cand))
    k_adv = int(np.argmax(vals[i_adv]))

    x = population[i_adv].copy()
    y = scenarios[k_adv].copy()
    fxy = f_surrogate(x, y)
    sx = ElitistCma(x, fxy, wra_record.outer_spread, 1.0,
                    domain=problem.x_domain if problem.bounded else None)
    if pool.kind == "cma":
        y_cov = pool.spread(k_adv)
    else:
        y_cov = 1e-2 * (problem.by / 2.0) ** 2 * np.eye(problem.dy)
    sy = ElitistCma(y, fxy, y_cov, 1.0,
                    domain=problem.y_domain if problem.bounded else None)

    _, f_star = problem.optimum()
    eta = adv_config.eta0
    measure_prev = math.inf
    inner_steps_x = adv_config.inner_budget_per_dim * problem.dx
    inner_steps_y = adv_config.inner_budget_per_dim * problem.dy
    iters = 0
    while counter.n < budget:
        sx._value[0] = f_surrogate(sx.incumbent, y)
        for _ in range(inner_steps_x):
            if counter.n >= budget:
                break
            sx.step(lambda v: f_surrogate(v, y), "min", rng)
        sy._value[0] = f_surrogate(x, sy.incumbent)
        for _ in range(inner_steps_y):
            if counter.n >= budget:
                break
            sy.step(lambda w: f_surrogate(x, w), "max", rng)
        x_bar = sx.incumbent.copy()
        y_bar = sy.incumbent.copy()
        b_x = x_bar - x
        b_y = y_bar - y
        x = x + eta * b_x
        y = y + eta * b_y
        iters += 1

        measure = max(sy.incumbent_value, -sx.incumbent_value)
        if measure < measure_prev:
            eta = min(eta * adv_config.eta_grow, 1.0)
        else:
            eta = max(eta * adv_config.eta_shrink, adv_config.eta_min)
        measure_prev = measure

        gap = abs(problem.worst_case_value(x) - f_star)
        record.log(counter.n, iters, gap, measure, wra_record.restarts)
        _thin_trace(record, adv_config.max_trace_rows)
        if gap <= adv_config.success_tol:
            record.mark_success(counter.n)
            if adv_config.stop_on_success:
                record.termination = "success_stop"
                break
        stalled = (
            eta * eta * (float(b_x @ b_x) + float(b_y @ b_y)) < adv_config.g_tol
            or min(sx.step_size, sy.step_size) < adv_config.sigma_min
        )
        if stalled:
            record.termination = "local_search_stalled"
            break

    record.final_x = x
    record.final_scenario = y
    record.fcalls_total = counter.n
    record.wall_time = time.perf_counter() - t0
    return record


# ---------------------------------------------------------------------------
# algorithm dispatch
# ---------------------------------------------------------------------------

ALGORITHM_IDS = (
    "wra-cma", "wra-aga", "wra-cma+adv", "wra-aga+adv", "adv-cma", "zopgda",
)


def run_algorithm(
    name, problem, budget=DEFAULT_BUDGET, seed=0, wra_params=None, outer=None,
    adv_config=None, zo_config=None, restarts=False, extra_scenarios=0,
):
    """Run one trial of any supported algorithm identifier."""
    if name not in ALGORITHM_IDS:
        raise InvalidInputError(
            f"unknown algorithm {name!r}; expected one of {ALGORITHM_IDS}"
        )
    if name in ("wra-cma", "wra-aga"):
        kind = name.split("-")[1]
        if not restarts:
            return run_wra(problem, kind, budget, seed,
                           wra_params=wra_params, outer=outer)

        def runner(sub_seed, counter, restart_index):
            return run_wra(problem, kind, budget, sub_seed,
                           wra_params=wra_params, outer=outer,
                           counter=counter, restart_index=restart_index)

        record, _, _ = run_with_restarts(
            problem, runner, budget, seed, algorithm=name,
            extra_scenarios=extra_scenarios,
        )
        return record
    if name in ("wra-cma+adv", "wra-aga+adv"):
        kind = name.split("-")[1].split("+")[0]
        return run_wra_with_local_search(
            problem, kind, budget, seed, wra_params=wra_params, outer=outer,
            adv_config=adv_config, extra_scenarios=extra_scenarios,
            algorithm=name,
        )
    if name == "adv-cma":
        return run_adversarial_cmaes(problem, adv_config, budget, seed)
    return run_zopgda(problem, zo_config, budget, seed)


def run_wra_with_local_search(
    problem, solver_kind, budget=DEFAULT_BUDGET, seed=0, wra_params=None,
    outer=None, adv_config=None, extra_scenarios=0, algorithm=None,
):
    """Ranking-approximation runs interleaved with local search, restarting
    after each local-search phase until the budget is spent.

    The ranking runs enable the stagnation stop by default here, so the
    switch to local search actually happens on problems where the outer
    search would otherwise idle far below its spread-based stop.
    """
    outer = outer or OuterSettings()
    if not outer.stagnation:
        outer = replace(outer, stagnation=True)
    adv_config = adv_config or AdvCmaConfig()
    counter = EvalCounter()
    cert = EvalCounter()
    archive = RestartArchive()
    merged = TrialRecord(
        algorithm=algorithm or f"wra-{solver_kind}+adv",
        problem=problem_descriptor(problem),
        seed=seed,
        budget=int(budget),
    )
    t0 = time.perf_counter()
    restart_index = 0
    while counter.n < budget:
        rec = run_wra(
            problem, solver_kind, budget, derive_seed(seed, restart_index),
            wra_params=wra_params, outer=outer, counter=counter,
            restart_index=restart_index,
        )
        _merge_segment(merged, rec)
        if rec.population is not None and len(rec.population):
            archive.extend(rec.population, rec.scenarios)
        if rec.termination in ("budget", "success_stop"):
            break
        seg = local_search_hybrid(
            problem, rec, adv_config, budget,
            derive_seed(seed, restart_index, 1), counter,
        )
        _merge_segment(merged, seg)
        if seg.final_x is not None:
            ys = [seg.final_scenario] if seg.final_scenario is not None else []
            archive.extend([seg.final_x], ys)
        if seg.termination in ("budget", "success_stop"):
            break
        restart_index += 1
    merged.restarts = restart_index
    final_x, _ = archive_minmax_pick(
        problem, archive, cert, extra_scenarios, Rng(derive_seed(seed, 0xA5C))
    )
    if final_x is not None:
        merged.final_x = final_x
    merged.fcalls_total = counter.n
    merged.cert_fcalls = cert.n
    merged.wall_time = time.perf_counter() - t0
    return merged
