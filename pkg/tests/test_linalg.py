import numpy as np
import pytest

from wraopt.exceptions import (
    InvalidInputError,
    NotPositiveDefiniteError,
    RankDeficientError,
)
from wraopt.linalg import (
    cholesky_lower,
    condition_number,
    eigh,
    moore_penrose,
    sample_gaussian,
)
from wraopt.rng import Rng


def _char_poly_roots_by_bisection(s, n_scan=20_000, tol=1e-12):
    """Independent eigenvalue oracle: bisect sign changes of det(S - t I)."""
    d = s.shape[0]
    radius = 1.0 + np.sqrt(np.sum(s * s))
    ts = np.linspace(-radius, radius, n_scan)
    dets = np.array([np.linalg.det(s - t * np.eye(d)) for t in ts])
    roots = []
    for i in range(n_scan - 1):
        a, b = ts[i], ts[i + 1]
        fa, fb = dets[i], dets[i + 1]
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb < 0.0:
            for _ in range(200):
                m = 0.5 * (a + b)
                fm = np.linalg.det(s - m * np.eye(d))
                if fa * fm <= 0.0:
                    b = m
                else:
                    a, fa = m, fm
                if b - a < tol:
                    break
            roots.append(0.5 * (a + b))
    return np.array(roots)


def test_eigh_identity():
    evals, v = eigh(np.eye(3))
    assert np.allclose(evals, 1.0)
    assert np.allclose(v @ v.T, np.eye(3), atol=1e-12)


def test_eigh_diagonal_sorted():
    evals, _ = eigh(np.diag([4.0, 1.0]))
    assert np.allclose(evals, [1.0, 4.0])


def test_eigh_random_vs_bisection_oracle():
    rng = np.random.default_rng(2024)
    a = rng.normal(size=(4, 4))
    s = 0.5 * (a + a.T)
    evals, v = eigh(s)
    for lam, vec in zip(evals, v.T):
        assert np.linalg.norm(s @ vec - lam * vec) <= 1e-9
    oracle = _char_poly_roots_by_bisection(s)
    assert len(oracle) == 4
    assert np.allclose(np.sort(oracle), evals, atol=1e-8)


@pytest.mark.parametrize("dim", [1, 2, 3, 5, 10, 30])
def test_eigh_reconstruction_many(dim):
    rng = np.random.default_rng(dim)
    for _ in range(40):
        a = rng.normal(size=(dim, dim))
        s = 0.5 * (a + a.T)
        evals, v = eigh(s)
        norm = max(1.0, np.linalg.norm(s, "fro"))
        assert np.linalg.norm(v @ np.diag(evals) @ v.T - s, "fro") <= 1e-10 * norm
        assert np.linalg.norm(v.T @ v - np.eye(dim), "fro") <= 1e-10
        assert np.all(np.diff(evals) >= 0.0)


def test_eigh_rejects_nonfinite():
    s = np.eye(2)
    s[0, 1] = s[1, 0] = np.nan
    with pytest.raises(InvalidInputError):
        eigh(s)


def test_eigh_rejects_asymmetric():
    with pytest.raises(InvalidInputError):
        eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_condition_number_trivial():
    assert condition_number(np.eye(5)) == 1.0
    assert condition_number(np.diag([9.0, 1.0])) == pytest.approx(9.0)


def test_condition_number_vs_eigh():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3))
    s = a.T @ a + np.eye(3)
    evals, _ = eigh(s)
    assert condition_number(s) == pytest.approx(evals[-1] / evals[0], rel=1e-12)


def test_condition_number_scale_invariant():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(6, 6))
    s = a.T @ a + 0.5 * np.eye(6)
    c = condition_number(s)
    for scale in (1e-7, 3.0, 2.5e8):
        assert condition_number(scale * s) == pytest.approx(c, rel=1e-12)


def test_condition_number_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        condition_number(np.diag([1.0, -1.0]))


def test_sample_gaussian_degenerate():
    r = Rng(0)
    assert np.allclose(sample_gaussian(np.zeros(2), np.zeros((2, 2)), r), 0.0)
    assert np.allclose(sample_gaussian(np.array([5.0]), np.zeros((1, 1)), r), 5.0)


def test_sample_gaussian_moments():
    r = Rng(11)
    n = 100_000
    xs = np.empty((n, 2))
    mean = np.zeros(2)
    cov = np.eye(2)
    for i in range(n):
        xs[i] = sample_gaussian(mean, cov, r)
    assert np.max(np.abs(xs.mean(axis=0))) < 0.02
    emp = np.cov(xs.T)
    assert np.max(np.abs(emp - cov)) < 0.05


def test_sample_gaussian_bit_identical_replay():
    mean = np.array([1.0, -2.0, 0.5])
    a = np.random.default_rng(8).normal(size=(3, 3))
    cov = a @ a.T
    x1 = sample_gaussian(mean, cov, Rng(77))
    x2 = sample_gaussian(mean, cov, Rng(77))
    assert np.array_equal(x1, x2)


def test_sample_gaussian_consumes_dim_normals():
    r1 = Rng(5)
    r2 = Rng(5)
    sample_gaussian(np.zeros(4), np.eye(4), r1)
    r2.normals(4)
    assert r1.u64() == r2.u64()


def test_cholesky_matches_numpy():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(6, 6))
    s = a @ a.T + np.eye(6)
    lower = cholesky_lower(s)
    assert np.allclose(lower @ lower.T, s, atol=1e-12)
    assert np.allclose(lower, np.linalg.cholesky(s), atol=1e-10)
    with pytest.raises(NotPositiveDefiniteError):
        cholesky_lower(np.diag([1.0, 0.0]))


def test_moore_penrose_diagonal():
    assert np.allclose(moore_penrose(np.diag([2.0, 2.0])), np.diag([0.5, 0.5]))
    assert np.allclose(moore_penrose(3.0 * np.eye(4)), np.eye(4) / 3.0)


def test_moore_penrose_band_penrose_conditions():
    b = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    p = moore_penrose(b)
    assert np.max(np.abs(p @ b @ p - p)) <= 1e-10
    assert np.max(np.abs((p @ b).T - p @ b)) <= 1e-10
    assert np.max(np.abs(b @ p @ b - b)) <= 1e-10
    assert np.max(np.abs((b @ p).T - b @ p)) <= 1e-10


def test_moore_penrose_tall_full_column_rank():
    b = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    p = moore_penrose(b)
    assert np.allclose(p @ b, np.eye(2), atol=1e-10)


def test_moore_penrose_rejects_rank_deficient():
    with pytest.raises(RankDeficientError):
        moore_penrose(np.diag([1.0, 0.0]))
    with pytest.raises(RankDeficientError):
        moore_penrose(np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]))
