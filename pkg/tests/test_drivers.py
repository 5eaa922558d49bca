import numpy as np
import pytest

from wraopt.drivers import (
    AdvCmaConfig,
    OuterSettings,
    RestartArchive,
    ZoPgdaConfig,
    archive_minmax_pick,
    local_search_hybrid,
    run_adversarial_cmaes,
    run_algorithm,
    run_with_restarts,
    run_wra,
    run_zopgda,
    zo_gradient,
)
from wraopt.problems import EvalCounter, make_problem
from wraopt.rng import Rng

BUDGET_SLACK = 12 * 12  # one outer-iteration block


def trace_tuple(rec):
    return (
        tuple(rec.trace_fcalls), tuple(rec.trace_iteration),
        tuple(rec.trace_gap), tuple(rec.trace_best_approx),
        tuple(rec.trace_restarts),
    )


# -- run_wra ------------------------------------------------------------------


def test_run_wra_small_f5_all_seeds_succeed():
    p = make_problem("f5", dx=1, dy=1, b=1.0)
    for seed in range(20):
        rec = run_wra(p, "cma", budget=100_000, seed=seed)
        assert rec.success, f"seed {seed} failed"
        assert min(rec.trace_gap) <= 1e-6


def test_run_wra_budget_smaller_than_warm_start():
    p = make_problem("f5", dx=2, dy=2)
    rec = run_wra(p, "cma", budget=10, seed=0)
    assert rec.fcalls_total == 0
    assert rec.trace_fcalls == []
    assert rec.termination == "budget"


def test_run_wra_deterministic_replay():
    p = make_problem("f8", dx=3, dy=3)
    a = run_wra(p, "aga", budget=20_000, seed=7)
    b = run_wra(p, "aga", budget=20_000, seed=7)
    assert trace_tuple(a) == trace_tuple(b)
    assert np.array_equal(a.final_x, b.final_x)


def test_run_wra_budget_compliance_and_ledger():
    p = make_problem("f5", dx=4, dy=4)
    for kind in ("cma", "aga"):
        budget = 5000
        rec = run_wra(p, kind, budget=budget, seed=3)
        assert rec.fcalls_total <= budget + BUDGET_SLACK
        assert all(b > a for a, b in zip(rec.trace_fcalls, rec.trace_fcalls[1:]))


def test_run_wra_gap_trace_best_so_far_monotone():
    p = make_problem("f5", dx=3, dy=3)
    rec = run_wra(p, "cma", budget=60_000, seed=1)
    best = np.minimum.accumulate(rec.trace_gap)
    assert all(x <= y + 1e-18 for x, y in zip(best[1:], best[:-1]))


def test_run_wra_stagnation_termination():
    p = make_problem("f1", dx=3, dy=3)
    outer = OuterSettings(stagnation=True, stagnation_window=5,
                          stagnation_tol=1e30)  # trips as soon as possible
    rec = run_wra(p, "cma", budget=100_000, seed=0, outer=outer)
    assert rec.termination == "stagnation"
    assert len(rec.trace_fcalls) == 6


# -- restart wrapper ----------------------------------------------------------


def test_run_with_restarts_single_segment():
    p = make_problem("f5", dx=2, dy=2)

    def runner(seed, counter, restart_index):
        return run_wra(p, "cma", budget=4000, seed=seed, counter=counter,
                       restart_index=restart_index)

    record, archive, final_x = run_with_restarts(p, runner, budget=4000, seed=5)
    assert record.restarts == 0
    assert len(archive.xs) == 12  # one archived population
    assert final_x is not None
    assert record.cert_fcalls > 0


def test_run_with_restarts_multiple_segments():
    p = make_problem("f5", dx=2, dy=2)
    outer = OuterSettings(v_min_x=1e-3)  # terminate early, forcing restarts

    def runner(seed, counter, restart_index):
        return run_wra(p, "cma", budget=60_000, seed=seed, counter=counter,
                       outer=outer, restart_index=restart_index)

    record, archive, final_x = run_with_restarts(p, runner, budget=60_000, seed=1)
    assert record.restarts >= 1
    assert len(archive.xs) >= 24
    assert record.fcalls_total <= 60_000 + BUDGET_SLACK


def test_archive_minmax_pick_enumeration_oracle():
    p = make_problem("f5", dx=2, dy=2)
    archive = RestartArchive()
    xs = [np.array([2.0, 2.0]), np.array([0.1, -0.1]), np.array([1.0, 0.0])]
    ys = [np.array([0.5, 0.5]), np.array([-3.0, 3.0]), np.array([0.0, 0.0])]
    archive.extend(xs, ys)
    cert = EvalCounter()
    pick, value = archive_minmax_pick(p, archive, cert)
    table = np.array([[p.evaluate(x, y) for y in ys] for x in xs])
    best = int(np.argmin(table.max(axis=1)))
    assert np.array_equal(pick, xs[best])
    assert value == pytest.approx(table.max(axis=1)[best])
    assert cert.n == 9


def test_archive_extra_scenarios_monotone():
    p = make_problem("f5", dx=2, dy=2)
    archive = RestartArchive()
    archive.extend([np.array([0.5, 0.5])], [np.array([0.1, 0.1])])
    vals = []
    for extra in (0, 5, 25):
        _, value = archive_minmax_pick(
            p, archive, EvalCounter(), extra, Rng(0)
        )
        vals.append(value)
    assert vals[0] <= vals[1] <= vals[2] + 1e-12


# -- local search hybrid ------------------------------------------------------


def test_local_search_hybrid_zero_budget():
    p = make_problem("f5", dx=2, dy=2)
    counter = EvalCounter()
    rec = run_wra(p, "cma", budget=3000, seed=2, counter=counter)
    seg = local_search_hybrid(p, rec, budget=counter.n, seed=3, counter=counter)
    assert seg.trace_fcalls == []
    assert seg.fcalls_total == counter.n


def test_local_search_hybrid_improves_on_f5():
    p = make_problem("f5", dx=2, dy=2)
    counter = EvalCounter()
    outer = OuterSettings(v_min_x=1e-2)
    rec = run_wra(p, "cma", budget=50_000, seed=4, counter=counter, outer=outer)
    assert rec.termination == "stddev_converged"
    seg = local_search_hybrid(p, rec, AdvCmaConfig(), budget=50_000, seed=5,
                              counter=counter)
    assert len(seg.trace_gap) >= 1
    best = np.minimum.accumulate(seg.trace_gap)
    assert all(x <= y + 1e-18 for x, y in zip(best[1:], best[:-1]))
    assert seg.final_scenario is not None


def test_surrogate_dominates_plain_objective():
    # f_Y(x, y) >= f(x, y) for any frozen scenario set by construction
    p = make_problem("f5", dx=2, dy=2)
    rng = Rng(8)
    scenarios = [p.y_domain.sample_uniform(rng) for _ in range(4)]
    for _ in range(50):
        x = p.x_domain.sample_uniform(rng)
        y = p.y_domain.sample_uniform(rng)
        f_plain = p.evaluate(x, y)
        f_sur = max([f_plain] + [p.evaluate(x, s) for s in scenarios])
        assert f_sur >= f_plain


def test_run_algorithm_hybrid_id_smoke():
    p = make_problem("f5", dx=2, dy=2)
    rec = run_algorithm("wra-cma+adv", p, budget=30_000, seed=1)
    assert rec.algorithm == "wra-cma+adv"
    assert rec.fcalls_total <= 30_000 + BUDGET_SLACK
    assert rec.final_x is not None


# -- adversarial baseline -----------------------------------------------------


def test_adv_cma_converges_small_unbounded():
    p = make_problem("f5", dx=2, dy=2, bounded=False)
    rec = run_adversarial_cmaes(
        p, AdvCmaConfig(stop_on_success=True), budget=500_000, seed=0
    )
    assert rec.success
    assert rec.fcalls_to_success <= 200_000


def test_adv_cma_restarts_fire_near_convergence():
    p = make_problem("f5", dx=2, dy=2, bounded=False)
    rec = run_adversarial_cmaes(p, AdvCmaConfig(), budget=400_000, seed=0)
    assert rec.restarts >= 1


def test_adv_cma_deterministic_and_budget():
    p = make_problem("f5", dx=3, dy=3)
    a = run_adversarial_cmaes(p, budget=30_000, seed=9)
    b = run_adversarial_cmaes(p, budget=30_000, seed=9)
    assert trace_tuple(a) == trace_tuple(b)
    assert a.fcalls_total <= 30_000 + BUDGET_SLACK


# -- zeroth-order gradient and descent-ascent ---------------------------------


def test_zo_gradient_linear_mean_estimate():
    a = np.array([1.5, -2.0, 0.7, 0.0])
    rng = Rng(3)
    est = np.zeros(4)
    reps = 200
    for _ in range(reps):
        est += zo_gradient(lambda v: float(a @ v), np.zeros(4), 50, 1e-3, rng)
    est /= reps
    scale = np.linalg.norm(a)
    assert np.all(np.abs(est - a) <= 0.15 * scale)


def test_zo_gradient_constant_zero_and_counts():
    c = EvalCounter()
    g = zo_gradient(lambda v: 4.2, np.ones(3), 5, 1e-3, Rng(1), c)
    assert np.array_equal(g, np.zeros(3))
    assert c.n == 6  # q + 1


def test_zo_gradient_quadratic_bias_at_origin():
    # the estimator is unbiased on quadratics; noise scales with mu
    rng = Rng(4)
    norms = []
    for _ in range(100):
        g = zo_gradient(lambda v: float(np.sum(v * v)), np.zeros(3), 5, 1e-3, rng)
        norms.append(np.linalg.norm(g))
    assert np.median(norms) <= 10 * 1e-3 * 3


def test_run_zopgda_converges_small_unbounded():
    p = make_problem("f5", dx=3, dy=3, bounded=False)
    rec = run_zopgda(p, ZoPgdaConfig(stop_on_success=True), budget=2_000_000,
                     seed=2)
    assert rec.success


def test_run_zopgda_deterministic_and_budget():
    p = make_problem("f5", dx=3, dy=3)
    a = run_zopgda(p, budget=50_000, seed=5)
    b = run_zopgda(p, budget=50_000, seed=5)
    assert trace_tuple(a) == trace_tuple(b)
    assert a.fcalls_total <= 50_000 + BUDGET_SLACK
    assert all(x < y for x, y in zip(a.trace_fcalls, a.trace_fcalls[1:]))


def test_run_zopgda_restart_rule():
    p = make_problem("f5", dx=2, dy=2)
    cfg = ZoPgdaConfig(restart=True, restart_tol=1e30)  # always triggers
    rec = run_zopgda(p, cfg, budget=5_000, seed=1)
    assert rec.restarts > 0


def test_run_algorithm_dispatch_and_unknown():
    p = make_problem("f5", dx=2, dy=2)
    for name in ("wra-cma", "wra-aga", "adv-cma", "zopgda"):
        rec = run_algorithm(name, p, budget=3000, seed=0)
        assert rec.fcalls_total > 0
    from wraopt.exceptions import InvalidInputError

    with pytest.raises(InvalidInputError):
        run_algorithm("nope", p, budget=100, seed=0)


def test_run_algorithm_with_restarts_flag():
    p = make_problem("f5", dx=2, dy=2)
    rec = run_algorithm("wra-cma", p, budget=20_000, seed=3, restarts=True)
    assert rec.algorithm == "wra-cma"
    assert rec.final_x is not None
    assert rec.cert_fcalls > 0
