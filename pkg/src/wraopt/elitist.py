"""(1+1)-CMA-ES: elitist search with success-rule step-size control.

Used as the inner engine of the adversarial baseline and as the
multistart evaluator that certifies worst-case objective values.  The
covariance adapts by a rank-one update along the smoothed search path,
with the update stalled (compensated) while the smoothed success rate is
high, following the standard published constants: damping ``1 + d/2``,
target success rate ``2/11``, success smoothing ``1/12``, path constant
``2/(d+2)``, covariance rate ``2/(d^2+6)``, stall threshold ``0.44``.
"""

import math

import numpy as np

from ._jit import kernel
from .exceptions import InvalidInputError
from .linalg import _cholesky_lower
from .cmaes import _mirror_vec
from .rng import Rng, _next_normal

SIGMA_MIN = 1e-300
SIGMA_MAX = 1e300


def elitist_constants(dim):
    """[d_damp, p_target, c_p, c_c, c_cov, p_thresh] for the given dim."""
    return np.array(
        [1.0 + dim / 2.0, 2.0 / 11.0, 1.0 / 12.0, 2.0 / (dim + 2.0),
         2.0 / (dim * dim + 6.0), 0.44]
    )


@kernel
def _elitist_propose(incumbent, chol, sigma, state, lo, hi, bounded, raw, out):
    """Sample incumbent + sigma * L z, mirrored into the box."""
    d = incumbent.shape[0]
    z = np.empty(d)
    for i in range(d):
        z[i] = _next_normal(state)
    for i in range(d):
        s = 0.0
        for j in range(i + 1):
            s += chol[i, j] * z[j]
        raw[i] = incumbent[i] + sigma[0] * s
    if bounded:
        _mirror_vec(raw, lo, hi, out)
    else:
        for i in range(d):
            out[i] = raw[i]


@kernel
def _elitist_update(
    incumbent, value, cov, chol, sigma, p_succ, path, consts, cand, cand_value,
    success,
):
    """Post-evaluation state update; refreshes the Cholesky factor on accept.

    Returns 1 if the covariance had to be jittered to stay factorizable.
    """
    d = incumbent.shape[0]
    d_damp = consts[0]
    p_target = consts[1]
    c_p = consts[2]
    c_c = consts[3]
    c_cov = consts[4]
    p_thresh = consts[5]

    s = 1.0 if success else 0.0
    p_succ[0] = (1.0 - c_p) * p_succ[0] + c_p * s
    sigma[0] *= np.exp((p_succ[0] - p_target) / (d_damp * (1.0 - p_target)))
    if sigma[0] < SIGMA_MIN:
        sigma[0] = SIGMA_MIN
    elif sigma[0] > SIGMA_MAX:
        sigma[0] = SIGMA_MAX
    if not success:
        return 0

    if p_succ[0] < p_thresh:
        k = np.sqrt(c_c * (2.0 - c_c))
        for i in range(d):
            step = (cand[i] - incumbent[i]) / sigma[0]
            path[i] = (1.0 - c_c) * path[i] + k * step
        for i in range(d):
            for j in range(i, d):
                v = (1.0 - c_cov) * cov[i, j] + c_cov * path[i] * path[j]
                cov[i, j] = v
                cov[j, i] = v
    else:
        comp = c_c * (2.0 - c_c)
        for i in range(d):
            path[i] = (1.0 - c_c) * path[i]
        for i in range(d):
            for j in range(i, d):
                v = (1.0 - c_cov) * cov[i, j] + c_cov * (
                    path[i] * path[j] + comp * cov[i, j]
                )
                cov[i, j] = v
                cov[j, i] = v

    for i in range(d):
        incumbent[i] = cand[i]
    value[0] = cand_value
    jittered = 0
    if _cholesky_lower(cov, chol) != 0:
        # numerical rescue: bump the diagonal until factorizable
        trace = 0.0
        for i in range(d):
            trace += cov[i, i]
        bump = 1e-14 * max(trace / d, 1e-300)
        while _cholesky_lower(cov, chol) != 0:
            jittered = 1
            for i in range(d):
                cov[i, i] += bump
            bump *= 10.0
    return jittered


class ElitistCma:
    """Elitist (1+1) evolution strategy state.

    The caller supplies the evaluated starting point; every step samples
    one offspring, evaluates it, and accepts only strict improvement in
    the configured sense.
    """

    def __init__(self, incumbent, incumbent_value, cov, step_size, domain=None):
        incumbent = np.ascontiguousarray(incumbent, dtype=np.float64)
        d = incumbent.shape[0]
        cov = np.ascontiguousarray(cov, dtype=np.float64)
        if cov.shape != (d, d):
            raise InvalidInputError("incumbent and covariance dimensions disagree")
        if step_size <= 0.0:
            raise InvalidInputError("step size must be positive")
        self.dim = d
        self.domain = domain
        self.incumbent = incumbent.copy()
        self._value = np.array([float(incumbent_value)])
        self.cov = 0.5 * (cov + cov.T)
        self.chol = np.empty((d, d))
        if _cholesky_lower(self.cov, self.chol) != 0:
            raise InvalidInputError("covariance is not positive definite")
        self._sigma = np.array([float(step_size)])
        self.p_succ = np.array([2.0 / 11.0])
        self.path = np.zeros(d)
        self.consts = elitist_constants(d)
        self._raw = np.empty(d)
        self._cand = np.empty(d)
        if domain is not None:
            self._lo = np.ascontiguousarray(domain.lower, dtype=np.float64)
            self._hi = np.ascontiguousarray(domain.upper, dtype=np.float64)
            if not domain.contains(self.incumbent):
                self.incumbent = np.minimum(
                    np.maximum(self.incumbent, self._lo), self._hi
                )
        else:
            self._lo = np.zeros(d)
            self._hi = np.ones(d)

    @property
    def incumbent_value(self):
        return float(self._value[0])

    @property
    def step_size(self):
        return float(self._sigma[0])

    def step(self, objective, sense, rng, counter=None):
        """One sample-evaluate-update cycle; returns True on acceptance."""
        if sense not in ("min", "max"):
            raise InvalidInputError("sense must be 'min' or 'max'")
        _elitist_propose(
            self.incumbent, self.chol, self._sigma, rng.state,
            self._lo, self._hi, self.domain is not None, self._raw, self._cand,
        )
        v = float(objective(self._cand.copy()))
        if counter is not None:
            counter.add(1)
        if sense == "min":
            success = v < self._value[0]
        else:
            success = v > self._value[0]
        _elitist_update(
            self.incumbent, self._value, self.cov, self.chol, self._sigma,
            self.p_succ, self.path, self.consts, self._cand, v, success,
        )
        return bool(success)


def multistart_maximize(
    objective, y_domain, n_starts, budget_per_start, rng, counter=None,
    stagnation_sigma_rel=1e-8,
):
    """Best of ``n_starts`` independent elitist maximization runs.

    Each run starts uniformly in the domain (that first evaluation counts
    toward its budget) and stops at ``budget_per_start`` evaluations or
    when the step size stagnates below ``stagnation_sigma_rel`` times the
    widest box edge.  Per-run RNG streams are derived from ``rng`` by the
    start index, so results do not depend on scheduling order.
    """
    if n_starts < 1:
        raise InvalidInputError("need at least one start")
    width = y_domain.width
    sigma0 = 1.0
    cov0 = np.diag((width / 4.0) ** 2)
    sigma_stop = stagnation_sigma_rel * float(np.max(width))
    best_y = None
    best_v = -math.inf
    for s in range(int(n_starts)):
        run_rng = rng.spawn(s)
        y0 = y_domain.sample_uniform(run_rng)
        v0 = float(objective(y0.copy()))
        if counter is not None:
            counter.add(1)
        es = ElitistCma(y0, v0, cov0, sigma0, domain=y_domain)
        used = 1
        while used < budget_per_start and es.step_size > sigma_stop:
            es.step(objective, "max", run_rng, counter)
            used += 1
        if best_y is None or es.incumbent_value > best_v:
            best_v = es.incumbent_value
            best_y = es.incumbent.copy()
    return best_y, best_v
