"""Dense symmetric linear algebra used by the optimizers.

Everything here is self-contained (no LAPACK) so that the numba and
pure-Python backends execute identical arithmetic.  The sizes involved are
small (dimension at most around one hundred), where cyclic Jacobi iteration
is accurate and fast enough.
"""

import numpy as np

from ._jit import kernel
from .exceptions import (
    InvalidInputError,
    NotPositiveDefiniteError,
    NotPSDError,
    RankDeficientError,
)
from .rng import _next_normal

_JACOBI_TOL = 1e-14
_MAX_SWEEPS = 100


@kernel
def _fro_norm(a):
    s = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            s += a[i, j] * a[i, j]
    return np.sqrt(s)


@kernel
def _jacobi_eigh(a, v):
    """Cyclic Jacobi eigendecomposition of symmetric ``a`` (overwritten).

    Rotations touch only the upper triangle (three-segment update); on
    return ``diag(a)`` holds unsorted eigenvalues and the columns of ``v``
    the matching eigenvectors.  A sweep that applies no rotation (every
    off-diagonal at or below the threshold) terminates the iteration.
    Returns the number of sweeps used.
    """
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            v[i, j] = 1.0 if i == j else 0.0
    thresh = _JACOBI_TOL * _fro_norm(a)
    if thresh == 0.0:
        return 0
    sweeps = 0
    while sweeps < _MAX_SWEEPS:
        sweeps += 1
        rotated = False
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if np.abs(apq) <= thresh:
                    continue
                rotated = True
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = 0.0
                for k in range(p):
                    g = a[k, p]
                    h = a[k, q]
                    a[k, p] = c * g - s * h
                    a[k, q] = s * g + c * h
                for k in range(p + 1, q):
                    g = a[p, k]
                    h = a[k, q]
                    a[p, k] = c * g - s * h
                    a[k, q] = s * g + c * h
                for k in range(q + 1, d):
                    g = a[p, k]
                    h = a[q, k]
                    a[p, k] = c * g - s * h
                    a[q, k] = s * g + c * h
                for k in range(d):
                    g = v[k, p]
                    h = v[k, q]
                    v[k, p] = c * g - s * h
                    v[k, q] = s * g + c * h
        if not rotated:
            break
    return sweeps


@kernel
def _sort_eigh_ascending(evals, v):
    """Insertion sort of eigenpairs by eigenvalue (stable, in place)."""
    d = evals.shape[0]
    for i in range(1, d):
        key = evals[i]
        j = i - 1
        while j >= 0 and evals[j] > key:
            j -= 1
        j += 1
        if j != i:
            for r in range(i, j, -1):
                evals[r] = evals[r - 1]
            evals[j] = key
            for k in range(d):
                tmp = v[k, i]
                for r in range(i, j, -1):
                    v[k, r] = v[k, r - 1]
                v[k, j] = tmp


@kernel
def _eigh_core(s, evals, v):
    a = s.copy()
    sweeps = _jacobi_eigh(a, v)
    for i in range(evals.shape[0]):
        evals[i] = a[i, i]
    _sort_eigh_ascending(evals, v)
    return sweeps


@kernel
def _cholesky_lower(a, lower):
    """Lower Cholesky factor; returns 0 on success, 1 if not SPD."""
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            lower[i, j] = 0.0
    for j in range(d):
        s = a[j, j]
        for k in range(j):
            s -= lower[j, k] * lower[j, k]
        if s <= 0.0:
            return 1
        lower[j, j] = np.sqrt(s)
        for i in range(j + 1, d):
            t = a[i, j]
            for k in range(j):
                t -= lower[i, k] * lower[j, k]
            lower[i, j] = t / lower[j, j]
    return 0


@kernel
def _sample_from_eig(mean, v, sqrt_evals, state, out):
    """Draw ``mean + V diag(sqrt_evals) z`` consuming dim normals in order."""
    d = mean.shape[0]
    for i in range(d):
        out[i] = mean[i]
    for j in range(d):
        zj = _next_normal(state) * sqrt_evals[j]
        if zj != 0.0:
            for i in range(d):
                out[i] += v[i, j] * zj


def _check_square_symmetric(s):
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
        raise InvalidInputError(f"expected a square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("matrix has non-finite entries")
    if not np.array_equal(s, s.T):
        if np.max(np.abs(s - s.T)) > 1e-12 * max(1.0, np.max(np.abs(s))):
            raise InvalidInputError("matrix is not symmetric")
        s = 0.5 * (s + s.T)
    return s


def eigh(s):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(evals, v)`` with eigenvalues ascending and orthonormal
    eigenvectors in the columns of ``v`` such that ``s == v @ diag(evals) @ v.T``.
    """
    s = _check_square_symmetric(s)
    d = s.shape[0]
    evals = np.empty(d, dtype=np.float64)
    v = np.empty((d, d), dtype=np.float64)
    _eigh_core(s, evals, v)
    return evals, v


def condition_number(s):
    """Ratio of the greatest to smallest eigenvalue of an SPD matrix."""
    evals, _ = eigh(s)
    if evals[0] <= 0.0:
        raise NotPositiveDefiniteError(
            f"smallest eigenvalue {evals[0]:.3e} is not positive"
        )
    return float(evals[-1] / evals[0])


def sample_gaussian(mean, cov, rng):
    """One multivariate normal draw via the eigenbasis of ``cov``.

    Consumes exactly ``len(mean)`` normal draws from ``rng`` (one per
    eigendirection, in ascending-eigenvalue order).  Small negative
    eigenvalues down to ``-1e-12 * max_eigenvalue`` are clamped to zero.
    """
    mean = np.asarray(mean, dtype=np.float64)
    cov = _check_square_symmetric(cov)
    if mean.ndim != 1 or mean.shape[0] != cov.shape[0]:
        raise InvalidInputError("mean and covariance dimensions disagree")
    evals, v = eigh(cov)
    top = max(evals[-1], 0.0)
    if evals[0] < -1e-12 * max(top, 1e-300):
        raise NotPSDError(f"covariance has eigenvalue {evals[0]:.3e} < 0")
    sqrt_evals = np.sqrt(np.maximum(evals, 0.0))
    out = np.empty_like(mean)
    _sample_from_eig(mean, v, sqrt_evals, rng.state, out)
    return out


def cholesky_lower(s):
    """Lower Cholesky factor of an SPD matrix."""
    s = _check_square_symmetric(s)
    lower = np.empty_like(s)
    if _cholesky_lower(s, lower) != 0:
        raise NotPositiveDefiniteError("matrix is not positive definite")
    return lower


def moore_penrose(b):
    """Moore-Penrose inverse of a full-rank rectangular matrix.

    Closed form for diagonal input; otherwise formed from the Jacobi
    eigendecomposition of the smaller Gram matrix.  Rank deficiency
    (relative to 1e-12 of the top Gram eigenvalue) is rejected.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise InvalidInputError("expected a matrix")
    if not np.all(np.isfinite(b)):
        raise InvalidInputError("matrix has non-finite entries")
    n_rows, n_cols = b.shape
    if n_rows == n_cols and np.array_equal(b, np.diag(np.diag(b))):
        diag = np.diag(b)
        if np.any(diag == 0.0):
            raise RankDeficientError("diagonal matrix has a zero entry")
        return np.diag(1.0 / diag)
    if n_cols <= n_rows:
        gram = b.T @ b
    else:
        gram = b @ b.T
    evals, v = eigh(gram)
    if evals[0] <= 1e-12 * evals[-1] or evals[-1] <= 0.0:
        raise RankDeficientError("matrix does not have full rank")
    gram_inv = (v / evals) @ v.T
    if n_cols <= n_rows:
        return gram_inv @ b.T
    return b.T @ gram_inv
