import math

import numpy as np
import pytest

from wraopt.drivers import TrialRecord
from wraopt.evaluation import (
    ClosedForm,
    Multistart,
    aggregate,
    certify_worst_case,
    judge_success,
)
from wraopt.exceptions import InvalidInputError, UnsupportedError
from wraopt.problems import make_problem
from wraopt.rng import Rng


def record_with(fcalls_to_success=None, gaps=(), fcalls=(), algorithm="a",
                problem=None):
    rec = TrialRecord(algorithm=algorithm, problem=problem or {"id": "f5"},
                      seed=0, budget=100)
    for f, g in zip(fcalls, gaps):
        rec.log(f, 0, g, 0.0, 0)
    if fcalls_to_success is not None:
        rec.success = True
        rec.fcalls_to_success = fcalls_to_success
    return rec


def test_judge_success_at_optimum_all_problems():
    for i in range(1, 12):
        p = make_problem(f"f{i}", dx=4, dy=4,
                         b=1.0 if i in (3, 10, 11) else 2.0)
        x_star, _ = p.optimum()
        assert judge_success(p, x_star)


def test_judge_success_gap_arithmetic():
    p = make_problem("f5", dx=4, dy=4, b=1.0)
    z = np.zeros(4)
    z[0] = 2e-3  # ||z||^2 = 4e-6, F(z) = (1+1)/2 * 4e-6 = 4e-6 > 1e-6
    assert not judge_success(p, z)
    assert judge_success(p, z, tol=5e-6)
    f8 = make_problem("f8", dx=3, dy=3)
    assert judge_success(f8, np.zeros(3))


def test_certify_protocols_agree_on_f5():
    p = make_problem("f5", dx=5, dy=5)
    rng = Rng(3)
    x = p.x_domain.sample_uniform(rng)
    closed = certify_worst_case(p, x, p.y_domain, ClosedForm())
    multi = certify_worst_case(
        p, x, p.y_domain, Multistart(n_starts=20, budget_per_start=3000),
        rng=Rng(4),
    )
    assert multi <= closed + 1e-12  # a finite search lower-bounds the max
    assert abs(multi - closed) < 1e-4


def test_certify_multistart_recovers_f9_max():
    p = make_problem("f9", dx=2, dy=2)
    rng = Rng(9)
    hits = 0
    for _ in range(20):
        x = p.x_domain.sample_uniform(rng)
        value = certify_worst_case(
            p, x, p.y_domain, Multistart(n_starts=100, budget_per_start=300),
            rng=rng.spawn(hits),
        )
        if abs(value - p.worst_case_value(x)) < 1e-3:
            hits += 1
    assert hits >= 19


def test_certify_closed_form_requires_problem():
    with pytest.raises(UnsupportedError):
        certify_worst_case(lambda x, y: 0.0, np.zeros(2), None, ClosedForm())


def test_certify_multistart_on_plain_callable():
    p = make_problem("f5", dx=2, dy=2)
    x = np.array([0.5, -0.5])
    value = certify_worst_case(
        lambda xx, yy: p.evaluate(xx, yy), x, p.y_domain,
        Multistart(n_starts=10, budget_per_start=2000), rng=Rng(5),
    )
    assert abs(value - p.worst_case_value(x)) < 1e-3


def test_aggregate_single_record():
    rec = record_with(fcalls_to_success=42, gaps=[1.0, 0.5], fcalls=[10, 20])
    s = aggregate([rec])
    assert s.n_success == 1 and s.n_trials == 1
    assert s.median_fcalls == 42 and s.q25_fcalls == 42 and s.q75_fcalls == 42


def test_aggregate_quartiles_linear_interpolation():
    recs = [record_with(fcalls_to_success=v) for v in (10, 20, 30, 40, 50)]
    s = aggregate(recs)
    assert s.median_fcalls == 30
    assert s.q25_fcalls == 20 and s.q75_fcalls == 40


def test_aggregate_all_failed():
    recs = [record_with() for _ in range(3)]
    s = aggregate(recs)
    assert s.n_success == 0
    assert math.isnan(s.median_fcalls)


def test_aggregate_curves_monotone_percentiles():
    rng = np.random.default_rng(0)
    recs = []
    for _ in range(7):
        fcalls = np.cumsum(rng.integers(1, 50, 30))
        gaps = np.abs(rng.normal(size=30)) * np.exp(-np.arange(30) / 10)
        recs.append(record_with(gaps=gaps.tolist(), fcalls=fcalls.tolist()))
    s = aggregate(recs)
    finite = np.isfinite(s.curve_gap_q25) & np.isfinite(s.curve_gap_q75)
    assert np.all(s.curve_gap_q25[finite] <= s.curve_gap_q50[finite] + 1e-15)
    assert np.all(s.curve_gap_q50[finite] <= s.curve_gap_q75[finite] + 1e-15)


def test_aggregate_rejects_heterogeneous_and_empty():
    with pytest.raises(InvalidInputError):
        aggregate([])
    with pytest.raises(InvalidInputError):
        aggregate([record_with(algorithm="a"), record_with(algorithm="b")])
