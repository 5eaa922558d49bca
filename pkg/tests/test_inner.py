import numpy as np
import pytest

from wraopt.exceptions import InvalidInputError
from wraopt.inner import (
    InnerCmaSolver,
    InnerSolverParams,
    aga_inner_round,
    cma_inner_round,
    finite_difference_gradient,
)
from wraopt.problems import EvalCounter, make_problem
from wraopt.rng import Rng


def setup_cma(problem, params=None, seed=0):
    params = params or InnerSolverParams()
    rng = Rng(seed)
    mean = problem.y_domain.sample_uniform(rng)
    spread = (problem.by / 2.0) ** 2 * np.eye(problem.dy)
    return InnerCmaSolver.fresh(mean, spread, problem), params, rng


def test_cma_round_dead_flag_short_circuits():
    p = make_problem("f5", dx=3, dy=3)
    solver, params, rng = setup_cma(p)
    solver.h[0] = 1
    c = EvalCounter()
    x = np.zeros(3)
    y0 = np.zeros(3)
    fy, yhat = cma_inner_round(p, x, y0, -1.0, solver, params, rng, c)
    assert c.n == 0
    assert fy == -1.0
    assert np.array_equal(yhat, y0)


def test_cma_round_improves_and_counts_in_population_blocks():
    p = make_problem("f5", dx=4, dy=4)
    solver, params, rng = setup_cma(p, seed=3)
    x = np.array([1.0, -0.5, 0.2, 0.0])
    y0 = p.y_domain.sample_uniform(rng)
    c = EvalCounter()
    f0 = p.evaluate(x, y0)
    fy, yhat = cma_inner_round(p, x, y0, f0, solver, params, rng, c)
    assert fy >= f0
    assert c.n % solver.popsize == 0 and c.n > 0
    assert p.y_domain.contains(yhat)
    # value consistency: reported value equals a fresh evaluation
    assert fy == pytest.approx(p.evaluate(x, yhat), abs=0.0)


def test_cma_round_monotone_over_many_rounds():
    p = make_problem("f11", dx=5, dy=5)
    solver, params, rng = setup_cma(p, seed=9)
    x = np.full(5, 0.7)
    y = p.y_domain.sample_uniform(rng)
    fy = p.evaluate(x, y)
    for _ in range(40):
        if solver.dead:
            break
        fy2, y2 = cma_inner_round(p, x, y, fy, solver, params, rng, EvalCounter())
        assert fy2 >= fy
        fy, y = fy2, y2


def test_cma_round_stddev_floor_sets_dead_flag():
    p = make_problem("f5", dx=2, dy=2)
    params = InnerSolverParams(v_min_y=1e-2, t_min=3)
    solver, _, rng = setup_cma(p)
    # shrink the inherited spread well below the floor
    solver.cov *= 0.0
    np.fill_diagonal(solver.cov, 1e-8)
    from wraopt.cmaes import _refresh_eig

    _refresh_eig(solver.cov, solver.eig_vals, solver.eig_vecs)
    x = np.zeros(2)
    y = np.zeros(2)
    fy = p.evaluate(x, y)
    rounds = 0
    while not solver.dead and rounds < 50:
        fy, y = cma_inner_round(p, x, y, fy, solver, params, rng, EvalCounter())
        rounds += 1
    assert solver.dead
    stds = solver.sigma[0] * np.sqrt(np.diag(solver.cov))
    assert np.all(stds >= params.v_min_y * (1.0 - 1e-12))


def test_cma_round_condition_blowup_restores_entry_spread():
    p = make_problem("f5", dx=2, dy=2)
    params = InnerSolverParams(cond_max_y=10.0)  # trips immediately
    solver, _, rng = setup_cma(p, seed=4)
    solver.cov = np.diag([1e4, 1e-4])
    from wraopt.cmaes import _refresh_eig

    _refresh_eig(solver.cov, solver.eig_vals, solver.eig_vecs)
    entry_spread = solver.spread_matrix()
    x = np.zeros(2)
    y = np.zeros(2)
    fy = p.evaluate(x, y)
    cma_inner_round(p, x, y, fy, solver, params, rng, EvalCounter())
    assert solver.dead
    assert np.allclose(solver.spread_matrix(), entry_spread)


def test_cma_round_respects_budget_ceiling():
    p = make_problem("f5", dx=3, dy=3)
    solver, _, rng = setup_cma(p, seed=5)
    params = InnerSolverParams(c_max=1000)
    c = EvalCounter()
    x = np.ones(3)
    y = np.zeros(3)
    cma_inner_round(p, x, y, p.evaluate(x, y), solver, params, rng, c,
                    budget=30)
    assert c.n <= 30 + solver.popsize - 1


# -- AGA ---------------------------------------------------------------------


def test_aga_round_dead_flag_short_circuits():
    p = make_problem("f5", dx=2, dy=2)
    c = EvalCounter()
    fy, yhat, eta, h = aga_inner_round(
        p, np.zeros(2), np.zeros(2), 0.0, 1.0, True, InnerSolverParams(), c
    )
    assert c.n == 0 and h and fy == 0.0 and eta == 1.0


def test_aga_first_step_improves_and_grows_eta():
    # concave quadratic inner problem: the first proposal improves, so the
    # learning rate is divided by beta
    p = make_problem("f5", dx=1, dy=1)
    c = EvalCounter()
    x = np.array([0.5])
    y = np.array([-1.0])
    fy = p.evaluate(x, y)
    fy2, y2, eta2, h2 = aga_inner_round(
        p, x, y, fy, 1.0, False, InnerSolverParams(beta=0.5), c
    )
    assert fy2 > fy
    assert eta2 == 2.0
    assert not h2
    assert c.n == 1 + 1  # gradient stencil (dy=1) plus one proposal


def test_aga_zero_gradient_plateau_raises_dead_flag():
    # f8 interior plateau: x small so |z| <= 1 away from every kink, the
    # local maximizer y=0 already held
    p = make_problem("f8", dx=1, dy=1)
    x = np.array([0.5])
    y = np.array([0.0])
    fy = p.evaluate(x, y)
    c = EvalCounter()
    fy2, y2, eta, h = aga_inner_round(
        p, x, y, fy, 1.0, False, InnerSolverParams(), c
    )
    assert h
    assert fy2 == fy
    assert c.n < 50  # finite work despite no possible improvement


def test_aga_monotone_and_projected():
    p = make_problem("f5", dx=3, dy=3)
    rng = Rng(12)
    x = np.array([2.5, -2.5, 2.5])
    y = p.y_domain.sample_uniform(rng)
    fy = p.evaluate(x, y)
    eta, h = 1.0, False
    for _ in range(30):
        if h:
            break
        fy2, y2, eta, h = aga_inner_round(
            p, x, y, fy, eta, h, InnerSolverParams(), EvalCounter()
        )
        assert fy2 >= fy
        assert p.y_domain.contains(y2)
        fy, y = fy2, y2
    # the inner optimum for f5 at this x is the clipped z
    assert np.allclose(y, p.worst_scenario(x), atol=1e-3)


def test_aga_respects_budget_ceiling():
    p = make_problem("f5", dx=6, dy=6)
    c = EvalCounter()
    x = np.ones(6)
    y = np.zeros(6)
    fy = p.evaluate(x, y)
    aga_inner_round(p, x, y, fy, 1.0, False,
                    InnerSolverParams(c_max=10_000), c, budget=25)
    assert c.n <= 25 + 6 + 1


# -- finite differences ------------------------------------------------------


def test_fd_gradient_linear_exact():
    a = np.array([2.0, -3.0, 0.5])
    g = finite_difference_gradient(
        lambda y: float(a @ y), np.array([1.0, 1.0, 1.0]), float(a.sum()), 1e-6
    )
    assert np.allclose(g, a, atol=1e-9)


def test_fd_gradient_quadratic_taylor_bound():
    y = np.array([1.0, 2.0])
    step = 1e-5
    g = finite_difference_gradient(
        lambda v: float(np.sum(v * v)), y, float(np.sum(y * y)), step
    )
    assert np.allclose(g, 2.0 * y, atol=2.0 * step)


def test_fd_gradient_constant_zero_and_counts():
    c = EvalCounter()
    g = finite_difference_gradient(lambda v: 7.0, np.zeros(4), 7.0, 1e-7, c)
    assert np.array_equal(g, np.zeros(4))
    assert c.n == 4


def test_fd_gradient_rejects_bad_step():
    with pytest.raises(InvalidInputError):
        finite_difference_gradient(lambda v: 0.0, np.zeros(2), 0.0, 0.0)


def test_params_validation():
    with pytest.raises(InvalidInputError):
        InnerSolverParams(c_max=0)
    with pytest.raises(InvalidInputError):
        InnerSolverParams(beta=1.0)
