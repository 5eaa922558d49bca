"""Worst-case ranking approximation over a pool of inherited scenarios.

One call approximates the ranking of a population of design vectors under
the worst-case objective by cheaply refining, for each vector, a candidate
worst scenario:

* warm start: every candidate picks the most adversarial of the pool's
  scenarios together with the solver configuration that produced it;
* rounds: the per-candidate inner solvers advance one round at a time,
  stopping early once consecutive value vectors agree in Kendall rank
  correlation, everyone's solver is dead, a round cap is hit, or the
  f-call ceiling is reached;
* post-processing: winning pool slots absorb the configuration of their
  best (lowest approximated value) selecting candidate, usage scores are
  rewarded or decayed, and stale slots are refreshed from the original
  initialization recipe.
"""

from dataclasses import dataclass, field

import numpy as np

from ._jit import kernel
from .exceptions import InvalidInputError
from .inner import (
    InnerCmaSolver,
    InnerSolverParams,
    aga_inner_round,
    cma_inner_round,
    NO_BUDGET,
)
from .linalg import sample_gaussian
from .cmaes import _refresh_eig, mirror_into_box, rank_candidates
from .problems import _eval_from_cache
from .rng import Rng

SOLVER_KINDS = ("cma", "aga")


@dataclass(frozen=True)
class WraParams:
    """Ranking-approximation settings (defaults follow the benchmark setup)."""

    tau_threshold: float = 0.7
    p_threshold: float = 0.1
    p_plus: float = 0.4
    p_minus: float = 0.05
    solver_kind: str = "cma"
    inner: InnerSolverParams = field(default_factory=InnerSolverParams)
    round_cap: int = 1000

    def __post_init__(self):
        if not 0.0 < self.p_threshold < self.p_plus <= 1.0:
            raise InvalidInputError("need 0 < p_threshold < p_plus <= 1")
        if self.p_minus <= 0.0:
            raise InvalidInputError("p_minus must be positive")
        if not -1.0 <= self.tau_threshold <= 1.0:
            raise InvalidInputError("tau_threshold must lie in [-1, 1]")
        if self.solver_kind not in SOLVER_KINDS:
            raise InvalidInputError(f"solver_kind must be one of {SOLVER_KINDS}")
        if self.round_cap < 1:
            raise InvalidInputError("round_cap must be positive")


@dataclass
class WraOutcome:
    """Result of one ranking-approximation call."""

    approx_values: np.ndarray
    rankings: np.ndarray
    rounds_used: int
    fcalls_used: int
    selected_indices: np.ndarray


@kernel
def _kendall_tau_b(a, b):
    n = a.shape[0]
    concordant = 0
    discordant = 0
    ties_a = 0
    ties_b = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            da = a[i] - a[j]
            db = b[i] - b[j]
            if da == 0.0:
                ties_a += 1
            if db == 0.0:
                ties_b += 1
            if da == 0.0 or db == 0.0:
                continue
            if (da > 0.0) == (db > 0.0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = np.sqrt(float(n0 - ties_a) * float(n0 - ties_b))
    if denom == 0.0:
        return 0.0
    tau = (concordant - discordant) / denom
    return min(max(tau, -1.0), 1.0)


def kendall_tau(a, b):
    """Tie-corrected (tau-b) Kendall rank correlation of two value vectors.

    Fully tied input (zero denominator) maps to 0, signalling the absence
    of ranking information rather than agreement.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.shape[0] < 2:
        raise InvalidInputError("kendall_tau expects two equal-length vectors (n >= 2)")
    return float(_kendall_tau_b(a, b))


@dataclass
class ScenarioPool:
    """The inherited triples (scenario, solver configuration, usage score).

    ``kind == "cma"`` stores the full sampling state per slot (mean,
    covariance, step size, evolution paths, update count); ``kind ==
    "aga"`` stores per-slot learning rates.  Slots are refreshed in place,
    never removed, so the pool size is invariant.
    """

    kind: str
    ys: np.ndarray
    ps: np.ndarray
    means: np.ndarray = None
    covs: np.ndarray = None
    sigmas: np.ndarray = None
    paths_sigma: np.ndarray = None
    paths_cov: np.ndarray = None
    ages: np.ndarray = None
    etas: np.ndarray = None

    @property
    def size(self):
        return self.ys.shape[0]

    def config(self, k):
        """The inheritable configuration of slot ``k``."""
        if self.kind == "cma":
            return (self.means[k], self.covs[k], self.sigmas[k],
                    self.paths_sigma[k], self.paths_cov[k], self.ages[k])
        return self.etas[k]

    def store_config(self, k, config):
        if self.kind == "cma":
            (self.means[k], self.covs[k], self.sigmas[k],
             self.paths_sigma[k], self.paths_cov[k], self.ages[k]) = config
        else:
            self.etas[k] = config

    def spread(self, k):
        """Sampling covariance of slot ``k`` with the step size folded in."""
        return self.sigmas[k] ** 2 * self.covs[k]

    def refresh_slot(self, k, problem, params, rng):
        """Re-initialize slot ``k`` exactly as at pool construction."""
        _init_slot(self, k, problem, params, rng)
        self.ps[k] = 1.0


def _init_slot(pool, k, problem, params, rng):
    dom = problem.y_domain
    if pool.kind == "cma":
        mean = dom.sample_uniform(rng)
        cov = (problem.by / 2.0) ** 2 * np.eye(problem.dy)
        y = sample_gaussian(mean, cov, rng)
        if problem.bounded:
            y = mirror_into_box(y, dom)
        pool.means[k] = mean
        pool.covs[k] = cov
        pool.sigmas[k] = 1.0
        pool.paths_sigma[k] = 0.0
        pool.paths_cov[k] = 0.0
        pool.ages[k] = 0
        pool.ys[k] = y
    else:
        pool.ys[k] = dom.sample_uniform(rng)
        pool.etas[k] = params.inner.eta0


def pool_init(n_pool, problem, params, rng):
    """Fresh pool of ``n_pool`` scenario/configuration/score triples."""
    if n_pool < 1:
        raise InvalidInputError("pool needs at least one slot")
    dy = problem.dy
    is_cma = params.solver_kind == "cma"
    pool = ScenarioPool(
        kind=params.solver_kind,
        ys=np.empty((n_pool, dy)),
        ps=np.ones(n_pool),
        means=np.empty((n_pool, dy)) if is_cma else None,
        covs=np.empty((n_pool, dy, dy)) if is_cma else None,
        sigmas=np.empty(n_pool) if is_cma else None,
        paths_sigma=np.empty((n_pool, dy)) if is_cma else None,
        paths_cov=np.empty((n_pool, dy)) if is_cma else None,
        ages=np.empty(n_pool, dtype=np.int64) if is_cma else None,
        etas=np.empty(n_pool) if params.solver_kind == "aga" else None,
    )
    for k in range(n_pool):
        _init_slot(pool, k, problem, params, rng)
    return pool


#: a warm-started sampling mean farther than this many coordinate spreads
#: from the slot's own incumbent scenario is treated as detached
_DETACH_FACTOR = 10.0


def _repair_detached_mean(solver, incumbent, problem):
    """Re-center an inherited sampling configuration that lost its incumbent.

    Under mirrored sampling the raw mean may settle on a fold boundary
    between two images of the maximizer while the incumbent scenario keeps
    improving; once the spread collapses there, no sample can ever beat
    the incumbent again and the configuration is dead for good.  Such a
    state is internally inconsistent: the distribution claims precision
    far better than its distance to the best point it produced.  The
    repair moves the mean onto the incumbent and lifts every coordinate
    spread to at least that distance, after which ordinary adaptation can
    take over again.
    """
    mean = solver.mean
    if problem.bounded:
        mean = mirror_into_box(mean, problem.y_domain)
    delta = np.abs(mean - incumbent)
    stds = np.sqrt(np.maximum(np.diag(solver.cov), 0.0)) * float(solver.sigma[0])
    if float(np.max(delta)) <= _DETACH_FACTOR * float(np.max(stds)):
        return
    solver.mean[:] = incumbent
    with np.errstate(divide="ignore"):
        scale = np.where(stds > 0.0, np.maximum(1.0, delta / stds), 1.0)
    solver.cov *= np.outer(scale, scale)
    _refresh_eig(solver.cov, solver.eig_vals, solver.eig_vecs)


@kernel
def _warm_start_values(pid, phis, zs, ys, by, gamma, dystar, values):
    lam = zs.shape[0]
    n = ys.shape[0]
    for i in range(lam):
        for k in range(n):
            values[i, k] = _eval_from_cache(
                pid, phis[i], zs[i], ys[k], by, gamma, dystar
            )


def wra_approximate(pool, candidates, params, problem, rng, counter, budget=None):
    """Approximate worst-case values and their ranking for a population.

    Mutates ``pool`` in place (warm-start inheritance and refresh) and
    returns ``(outcome, pool)``.  ``budget`` is an absolute ceiling on the
    shared ``counter``; rounds stop once it is reached (the warm start is
    always performed, so callers must leave room for it).
    """
    candidates = np.ascontiguousarray(candidates, dtype=np.float64)
    if candidates.ndim != 2 or candidates.shape[0] < 1:
        raise InvalidInputError("need a non-empty candidate population")
    lam = candidates.shape[0]
    n_pool = pool.size
    budget = NO_BUDGET if budget is None else int(budget)
    fcalls_at_entry = counter.n

    # warm start: evaluate every candidate against every pool scenario
    zs = np.empty((lam, problem.dy))
    phis = np.empty(lam)
    for i in range(lam):
        z, phi = problem._zcache(candidates[i])
        zs[i] = z
        phis[i] = phi
    values = np.empty((lam, n_pool))
    _warm_start_values(
        problem.index, phis, zs, pool.ys, problem.by, problem.gamma,
        problem.dy_star, values,
    )
    counter.add(lam * n_pool)
    k_worst = np.argmax(values, axis=1)  # argmax takes the lowest tied index
    f_cur = values[np.arange(lam), k_worst].copy()
    yhats = pool.ys[k_worst].copy()

    # per-candidate solver state: inherited configuration, fresh call flags
    if params.solver_kind == "cma":
        solvers = []
        for i, k in enumerate(k_worst):
            solver = InnerCmaSolver(pool.config(k), problem)
            _repair_detached_mean(solver, yhats[i], problem)
            solvers.append(solver)
    else:
        etas = pool.etas[k_worst].astype(np.float64)
        dead = np.zeros(lam, dtype=bool)

    rounds_used = 0
    f_prev = f_cur.copy()
    for _ in range(params.round_cap):
        if params.solver_kind == "cma":
            all_dead = all(s.dead for s in solvers)
        else:
            all_dead = bool(np.all(dead))
        if all_dead or counter.n >= budget:
            break
        rounds_used += 1
        round_seeds = [rng.u64() for _ in range(lam)]
        for i in range(lam):
            cache = (zs[i], float(phis[i]))
            if params.solver_kind == "cma":
                f_cur[i], yhats[i] = cma_inner_round(
                    problem, candidates[i], yhats[i], f_cur[i], solvers[i],
                    params.inner, Rng(round_seeds[i]), counter, budget,
                    _cache=cache,
                )
            else:
                f_cur[i], yhats[i], etas[i], dead[i] = aga_inner_round(
                    problem, candidates[i], yhats[i], f_cur[i], etas[i],
                    dead[i], params.inner, counter, budget, _cache=cache,
                )
        if lam < 2:
            # a single candidate carries no ranking information: one
            # refinement round, then stop
            break
        tau = kendall_tau(f_prev, f_cur)
        if tau > params.tau_threshold:
            break
        f_prev = f_cur.copy()

    # post-processing: write back winners, reward/decay scores, refresh
    selected = np.unique(k_worst)
    for k_sel in selected:
        members = np.flatnonzero(k_worst == k_sel)
        rep = members[int(np.argmin(f_cur[members]))]
        pool.ys[k_sel] = yhats[rep]
        if params.solver_kind == "cma":
            pool.store_config(k_sel, solvers[rep].omega())
        else:
            pool.store_config(k_sel, etas[rep])
        pool.ps[k_sel] = min(pool.ps[k_sel] + params.p_plus, 1.0)
    in_selected = np.zeros(n_pool, dtype=bool)
    in_selected[selected] = True
    for k in range(n_pool):
        if not in_selected[k]:
            pool.ps[k] -= params.p_minus
    for k in range(n_pool):
        if pool.ps[k] < params.p_threshold:
            pool.refresh_slot(k, problem, params, rng)

    outcome = WraOutcome(
        approx_values=f_cur,
        rankings=rank_candidates(f_cur, "min"),
        rounds_used=rounds_used,
        fcalls_used=counter.n - fcalls_at_entry,
        selected_indices=k_worst,
    )
    return outcome, pool
