"""Population-based CMA-ES with rank-one/rank-mu updates and CSA.

One implementation serves both roles in the min-max stack: the outer
minimizer of the worst-case objective and the inner maximizer over
scenarios.  The optimizer is strictly comparison-based: ``tell`` consumes
only an ordering of the candidates, never objective values, so any caller
can drive it in minimization or maximization sense by ranking accordingly.

Box constraints are handled by mirroring samples into the box for
evaluation while the distribution update uses the raw (pre-mirror)
samples, combined with capping each coordinate standard deviation at half
the box width.
"""

import enum
import math

import numpy as np

from ._jit import kernel
from .exceptions import InvalidInputError, ProtocolViolationError
from .linalg import _eigh_core, _sample_from_eig
from .rng import Rng

#: coordinate stddev cap, as a fraction of the box width
STDDEV_CAP_FRACTION = 0.5

#: relative floor applied to covariance eigenvalues
EIG_FLOOR = 1e-30


class TerminationReason(enum.Enum):
    STDDEV_CONVERGED = "stddev_converged"
    ILL_CONDITIONED = "ill_conditioned"


def default_popsize(dim):
    """The default population size, 4 + floor(3 ln dim)."""
    return 4 + int(math.floor(3.0 * math.log(dim)))


def recombination_weights(popsize):
    """Positive log-linear recombination weights over the best half."""
    mu = popsize // 2
    raw = np.log((popsize + 1) / 2.0) - np.log(np.arange(1, mu + 1))
    return raw / raw.sum()


def strategy_constants(dim, popsize):
    """[c_sigma, d_sigma, c_c, c_1, c_mu, mu_eff, chi_n] for (dim, popsize)."""
    w = recombination_weights(popsize)
    mu_eff = 1.0 / float(np.sum(w * w))
    c_sigma = (mu_eff + 2.0) / (dim + mu_eff + 5.0)
    d_sigma = (
        1.0
        + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (dim + 1.0)) - 1.0)
        + c_sigma
    )
    c_c = (4.0 + mu_eff / dim) / (dim + 4.0 + 2.0 * mu_eff / dim)
    c_1 = 2.0 / ((dim + 1.3) ** 2 + mu_eff)
    c_mu = min(
        1.0 - c_1,
        2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dim + 2.0) ** 2 + mu_eff),
    )
    chi_n = math.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim * dim))
    return np.array([c_sigma, d_sigma, c_c, c_1, c_mu, mu_eff, chi_n])


@kernel
def _mirror_coord(v, lo, hi):
    if lo <= v <= hi:
        return v
    width = hi - lo
    period = 2.0 * width
    t = (v - lo) % period
    if t < 0.0:
        t += period
    if t > width:
        t = period - t
    return lo + t


@kernel
def _mirror_vec(x, lo, hi, out):
    for i in range(x.shape[0]):
        out[i] = _mirror_coord(x[i], lo[i], hi[i])


@kernel
def _refresh_eig(cov, eig_vals, eig_vecs):
    """Decompose cov, floor eigenvalues at EIG_FLOOR * max, sync cov."""
    d = cov.shape[0]
    _eigh_core(cov, eig_vals, eig_vecs)
    top = eig_vals[d - 1]
    floor = EIG_FLOOR * top if top > 0.0 else 0.0
    floored = False
    for j in range(d):
        if eig_vals[j] < floor:
            eig_vals[j] = floor
            floored = True
    if floored:
        for i in range(d):
            for j in range(i, d):
                s = 0.0
                for k in range(d):
                    s += eig_vecs[i, k] * eig_vals[k] * eig_vecs[j, k]
                cov[i, j] = s
                cov[j, i] = s


@kernel
def _ask_core(mean, cov_evals, cov_evecs, sigma, state, raw, cand, lo, hi, bounded):
    lam = raw.shape[0]
    d = raw.shape[1]
    sqrt_scaled = np.empty(d)
    for j in range(d):
        ev = cov_evals[j]
        sqrt_scaled[j] = sigma * np.sqrt(ev) if ev > 0.0 else 0.0
    for i in range(lam):
        _sample_from_eig(mean, cov_evecs, sqrt_scaled, state, raw[i])
        if bounded:
            _mirror_vec(raw[i], lo, hi, cand[i])
        else:
            for j in range(d):
                cand[i, j] = raw[i, j]


@kernel
def _cap_stddev(cov, sigma, caps):
    """Scale rows/columns so sigma * sqrt(diag cov) <= caps (D C D form)."""
    d = cov.shape[0]
    scale = np.empty(d)
    any_capped = False
    for i in range(d):
        s = sigma * np.sqrt(cov[i, i]) if cov[i, i] > 0.0 else 0.0
        if s > caps[i]:
            scale[i] = caps[i] / s
            any_capped = True
        else:
            scale[i] = 1.0
    if any_capped:
        for i in range(d):
            for j in range(d):
                cov[i, j] *= scale[i] * scale[j]
    return any_capped


@kernel
def _tell_core(
    order,
    raw,
    weights,
    consts,
    mean,
    cov,
    sigma_box,
    p_sigma,
    p_cov,
    iter_box,
    eig_vals,
    eig_vecs,
    lo,
    hi,
    bounded,
    cap_fraction,
):
    """One comparison-based update; refreshes the cached eigensystem."""
    d = mean.shape[0]
    mu = weights.shape[0]
    c_sigma = consts[0]
    d_sigma = consts[1]
    c_c = consts[2]
    c_1 = consts[3]
    c_mu = consts[4]
    mu_eff = consts[5]
    chi_n = consts[6]
    sigma = sigma_box[0]

    old_mean = np.empty(d)
    for i in range(d):
        old_mean[i] = mean[i]
        mean[i] = 0.0
    for r in range(mu):
        w = weights[r]
        sel = order[r]
        for i in range(d):
            mean[i] += w * raw[sel, i]

    # whitened mean shift, using the pre-update eigensystem
    y_w = np.empty(d)
    for i in range(d):
        y_w[i] = (mean[i] - old_mean[i]) / sigma
    white = np.empty(d)
    for j in range(d):
        s = 0.0
        for i in range(d):
            s += eig_vecs[i, j] * y_w[i]
        ev = eig_vals[j]
        white[j] = s / np.sqrt(ev) if ev > 0.0 else 0.0
    cw = np.empty(d)
    for i in range(d):
        s = 0.0
        for j in range(d):
            s += eig_vecs[i, j] * white[j]
        cw[i] = s

    norm_ps = 0.0
    k_sigma = np.sqrt(c_sigma * (2.0 - c_sigma) * mu_eff)
    for i in range(d):
        p_sigma[i] = (1.0 - c_sigma) * p_sigma[i] + k_sigma * cw[i]
        norm_ps += p_sigma[i] * p_sigma[i]
    norm_ps = np.sqrt(norm_ps)

    t = iter_box[0]
    expo = 2.0 * (t + 1.0)
    denom = np.sqrt(1.0 - (1.0 - c_sigma) ** expo)
    h_sigma = 1.0 if norm_ps / denom < (1.4 + 2.0 / (d + 1.0)) * chi_n else 0.0

    k_c = np.sqrt(c_c * (2.0 - c_c) * mu_eff)
    for i in range(d):
        p_cov[i] = (1.0 - c_c) * p_cov[i] + h_sigma * k_c * y_w[i]

    decay = 1.0 - c_1 - c_mu
    delta_h = (1.0 - h_sigma) * c_c * (2.0 - c_c)
    for i in range(d):
        for j in range(i, d):
            v = (decay + c_1 * delta_h) * cov[i, j] + c_1 * p_cov[i] * p_cov[j]
            cov[i, j] = v
    for r in range(mu):
        w = weights[r] * c_mu
        sel = order[r]
        for i in range(d):
            yi = (raw[sel, i] - old_mean[i]) / sigma
            for j in range(i, d):
                yj = (raw[sel, j] - old_mean[j]) / sigma
                cov[i, j] += w * yi * yj
    for i in range(d):
        for j in range(i + 1, d):
            cov[j, i] = cov[i, j]

    sigma *= np.exp((c_sigma / d_sigma) * (norm_ps / chi_n - 1.0))
    sigma_box[0] = sigma

    if bounded:
        caps = np.empty(d)
        for i in range(d):
            caps[i] = cap_fraction * (hi[i] - lo[i])
        _cap_stddev(cov, sigma, caps)

    iter_box[0] = t + 1
    _refresh_eig(cov, eig_vals, eig_vecs)


@kernel
def _stable_order(values, descending, order):
    """Insertion-sorted candidate order with ascending-index tie break."""
    n = values.shape[0]
    for i in range(n):
        order[i] = i
    for i in range(1, n):
        key = order[i]
        kv = values[key]
        j = i - 1
        while j >= 0:
            ov = values[order[j]]
            if descending:
                worse = ov < kv
            else:
                worse = ov > kv
            if not worse:
                break
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = key
    return order


def rank_candidates(values, sense="min"):
    """Candidate indices ordered best first, ties broken by index."""
    values = np.asarray(values, dtype=np.float64)
    if sense not in ("min", "max"):
        raise InvalidInputError("sense must be 'min' or 'max'")
    order = np.empty(values.shape[0], dtype=np.int64)
    _stable_order(values, sense == "max", order)
    return order


def mirror_into_box(x, domain):
    """Reflect a point at the box walls until it lies inside.

    Equivalent to folding the line into the period-``2 (hi - lo)`` sawtooth;
    idempotent on interior points.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    _mirror_vec(x, domain.lower, domain.upper, out)
    return out


class PopulationCma:
    """Ask/tell CMA-ES state.

    Parameters
    ----------
    mean0 : array
        Initial distribution mean.
    cov0 : array
        Initial covariance; must be symmetric positive definite.  The step
        size starts at 1 so ``cov0`` carries the full initial scale.
    domain : BoxDomain, optional
        Box for mirroring and stddev capping; omit for unbounded search.
    popsize : int, optional
        Defaults to ``4 + floor(3 ln dim)``.
    """

    def __init__(self, mean0, cov0, domain=None, popsize=None):
        mean0 = np.ascontiguousarray(mean0, dtype=np.float64)
        cov0 = np.ascontiguousarray(cov0, dtype=np.float64)
        d = mean0.shape[0]
        if cov0.shape != (d, d):
            raise InvalidInputError("mean and covariance dimensions disagree")
        if not np.allclose(cov0, cov0.T, rtol=0.0, atol=1e-12):
            raise InvalidInputError("covariance must be symmetric")
        self.dim = d
        self.popsize = int(popsize) if popsize is not None else default_popsize(d)
        if self.popsize < 2:
            raise InvalidInputError("population size must be at least 2")
        self.domain = domain
        self.mean = mean0.copy()
        self.cov = 0.5 * (cov0 + cov0.T)
        self._sigma = np.ones(1)
        self.p_sigma = np.zeros(d)
        self.p_cov = np.zeros(d)
        self._iter = np.zeros(1, dtype=np.int64)
        self.weights = recombination_weights(self.popsize)
        self.consts = strategy_constants(d, self.popsize)
        self._eig_vals = np.empty(d)
        self._eig_vecs = np.empty((d, d))
        _eigh_core(self.cov, self._eig_vals, self._eig_vecs)
        if self._eig_vals[0] <= 0.0:
            raise InvalidInputError("initial covariance is not positive definite")
        _refresh_eig(self.cov, self._eig_vals, self._eig_vecs)
        self._raw = np.empty((self.popsize, d))
        self._cand = np.empty((self.popsize, d))
        self._pending = False
        if domain is not None:
            self._lo = np.ascontiguousarray(domain.lower, dtype=np.float64)
            self._hi = np.ascontiguousarray(domain.upper, dtype=np.float64)
        else:
            self._lo = np.zeros(d)
            self._hi = np.ones(d)

    # -- ask / tell ---------------------------------------------------------

    @property
    def step_size(self):
        return float(self._sigma[0])

    @property
    def iteration(self):
        return int(self._iter[0])

    @property
    def bounded(self):
        return self.domain is not None

    def ask(self, rng):
        """Sample the population; returns the mirrored candidates.

        Raw samples are retained internally for the next ``tell``.
        Consumes exactly ``popsize * dim`` normal draws from ``rng``.
        """
        _ask_core(
            self.mean, self._eig_vals, self._eig_vecs, self._sigma[0],
            rng.state, self._raw, self._cand, self._lo, self._hi, self.bounded,
        )
        self._pending = True
        return self._cand.copy()

    def tell(self, order):
        """Consume a best-first candidate ordering (comparison-based)."""
        if not self._pending:
            raise ProtocolViolationError("tell without a preceding ask")
        order = np.ascontiguousarray(order, dtype=np.int64)
        if order.shape != (self.popsize,) or not np.array_equal(
            np.sort(order), np.arange(self.popsize)
        ):
            raise InvalidInputError("order must be a permutation of 0..popsize-1")
        _tell_core(
            order, self._raw, self.weights, self.consts,
            self.mean, self.cov, self._sigma, self.p_sigma, self.p_cov,
            self._iter, self._eig_vals, self._eig_vecs,
            self._lo, self._hi, self.bounded, STDDEV_CAP_FRACTION,
        )
        self._pending = False

    # -- diagnostics --------------------------------------------------------

    def coordinate_stddevs(self):
        """sigma * sqrt(diag cov), the per-coordinate sampling spread."""
        return self.step_size * np.sqrt(np.maximum(np.diag(self.cov), 0.0))

    def condition_number(self):
        top, bottom = self._eig_vals[-1], self._eig_vals[0]
        return float(top / bottom) if bottom > 0.0 else math.inf

    def cap_coordinate_stddev(self, caps):
        """Cap each coordinate stddev by scaling rows/columns of cov."""
        caps = np.ascontiguousarray(caps, dtype=np.float64)
        if caps.shape != (self.dim,) or np.any(caps <= 0.0):
            raise InvalidInputError("caps must be positive, one per coordinate")
        if _cap_stddev(self.cov, self._sigma[0], caps):
            _refresh_eig(self.cov, self._eig_vals, self._eig_vecs)

    def should_terminate(self, v_min, cond_max):
        """Standard stopping test on spread and conditioning."""
        if float(np.max(self.coordinate_stddevs())) < v_min:
            return TerminationReason.STDDEV_CONVERGED
        if self.condition_number() > cond_max:
            return TerminationReason.ILL_CONDITIONED
        return None

    def clone(self):
        other = PopulationCma.__new__(PopulationCma)
        other.dim = self.dim
        other.popsize = self.popsize
        other.domain = self.domain
        other.mean = self.mean.copy()
        other.cov = self.cov.copy()
        other._sigma = self._sigma.copy()
        other.p_sigma = self.p_sigma.copy()
        other.p_cov = self.p_cov.copy()
        other._iter = self._iter.copy()
        other.weights = self.weights
        other.consts = self.consts
        other._eig_vals = self._eig_vals.copy()
        other._eig_vecs = self._eig_vecs.copy()
        other._raw = self._raw.copy()
        other._cand = self._cand.copy()
        other._pending = self._pending
        other._lo = self._lo
        other._hi = self._hi
        return other
