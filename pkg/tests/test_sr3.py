import math

import numpy as np
import pytest

from sr3_toolkit.errors import DimensionMismatchError, InfeasiblePointError, NonConvergenceError
from sr3_toolkit.gsvd import solve_relaxed_dense
from sr3_toolkit.linops import make_dense, make_diff_1d, make_identity, operator_norm, to_dense
from sr3_toolkit.problems import tomo_problem
from sr3_toolkit.prox import Regularizer
from sr3_toolkit.sampling import make_generator, standard_normal
from sr3_toolkit.sr3 import (FistaOptions, Sr3Config, Sr3Mode, coupled_lambda, duality_gap, fista_solve,
                             fixed_point_residuals, l1_value_bounds, lasso_duality_gap, relaxed_objective,
                             sr3_solve, y_update)


@pytest.fixture
def small_problem(random_operator):
    A = random_operator(20, 10, seed=31)
    b = standard_normal(make_generator(32), 20)
    x_ls = np.linalg.lstsq(A.matrix, b, rcond=None)[0]
    return A, b, 0.5 * float(np.sum(np.abs(x_ls)))


def test_y_update_thresholds_at_lambda_over_kappa():
    v = np.array([1.0, -0.2, 0.6])
    np.testing.assert_allclose(y_update(Regularizer.l1_penalty(2.0), v, 4.0), [0.5, 0.0, 0.1])


def test_coupled_lambda_scales_with_kappa():
    assert coupled_lambda(0.1, 50.0) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        coupled_lambda(0.1, 0.0)


def test_bounds_at_zero():
    A = make_dense(np.diag([1.0, 0.5]))
    b = np.array([3.0, 4.0])
    lower, upper = l1_value_bounds(A, b, 1.0, np.zeros(2))
    assert upper == pytest.approx(5.0)
    assert lower == pytest.approx(5.0 - 1.0 * 3.0 / 5.0)


def test_gap_closes_at_optimum():
    A = make_identity(2)
    b = np.array([3.0, 1.0])
    assert duality_gap(A, b, 2.0, np.array([2.0, 0.0])) == pytest.approx(0.0, abs=1e-14)
    assert duality_gap(A, b, 2.0, np.array([1.0, 1.0])) > 0.1


def test_gap_rejects_infeasible_point():
    with pytest.raises(InfeasiblePointError):
        duality_gap(make_identity(2), np.ones(2), 1.0, np.array([1.0, 1.0]))


def test_zero_residual_bounds_are_zero():
    assert l1_value_bounds(make_identity(2), np.array([1.0, 0.0]), 1.0, np.array([1.0, 0.0])) == (0.0, 0.0)


def test_fista_penalty_on_identity_is_soft_threshold():
    b = np.array([2.0, -0.3, 1.0])
    result = fista_solve(make_identity(3), b, Regularizer.l1_penalty(0.5), 1.0, gap_tol=1e-14)
    np.testing.assert_allclose(result.x, [1.5, 0.0, 0.5], atol=1e-12)
    assert result.converged
    assert lasso_duality_gap(make_identity(3), b, 0.5, result.x) <= 1e-12


def test_fista_reaches_gap_on_diag(diag_problem):
    A = diag_problem.A
    result = fista_solve(A, diag_problem.b, Regularizer.l1_ball(5.0), 1.0 / operator_norm(A) ** 2,
                         max_iter=20000, gap_tol=1e-10)
    assert result.converged and result.stop_reason == "gap_tol"
    assert result.gap_history[-1] <= 1e-10
    assert np.sum(np.abs(result.x)) <= 5.0 * (1 + 1e-9)
    assert result.total_cost == result.outer_iterations


def test_fista_stops_immediately_when_start_is_optimal():
    result = fista_solve(make_identity(3), np.zeros(3), Regularizer.l1_ball(1.0), 1.0)
    assert result.converged and result.outer_iterations == 0
    assert result.total_cost == 0


def test_fista_without_restart_still_converges(diag_problem):
    A = diag_problem.A
    result = fista_solve(A, diag_problem.b, Regularizer.l1_ball(5.0), 1.0 / operator_norm(A) ** 2,
                         max_iter=50000, gap_tol=1e-6, restart=False)
    assert result.converged


def test_config_validation():
    with pytest.raises(ValueError):
        Sr3Config(kappa=0.0, reg=Regularizer.none())
    with pytest.raises(ValueError):
        Sr3Config(kappa=1.0, reg=Regularizer.none(), max_outer=0)
    config = Sr3Config(kappa=2.0, reg=Regularizer.l1_ball(1.0))
    assert config.mode == Sr3Mode.INEXACT
    assert config.to_dict()['reg'] == {'kind': 'l1_ball', 'weight': 1.0}


def test_unregularized_solve_is_least_squares(small_problem):
    A, b, _ = small_problem
    config = Sr3Config(kappa=1.0, reg=Regularizer.none(), lsqr_atol=1e-14)
    result = sr3_solve(A, make_diff_1d(10), b, config)
    np.testing.assert_allclose(result.x, np.linalg.lstsq(A.matrix, b, rcond=None)[0], rtol=1e-8)
    np.testing.assert_allclose(result.y, np.diff(result.x))
    assert result.outer_iterations == 1 and result.stop_reason == "least_squares"


def test_dimension_mismatch(small_problem):
    A, b, tau = small_problem
    config = Sr3Config(kappa=1.0, reg=Regularizer.l1_ball(tau))
    with pytest.raises(DimensionMismatchError):
        sr3_solve(A, make_diff_1d(12), b, config)
    with pytest.raises(DimensionMismatchError):
        sr3_solve(A, make_identity(10), b[:-1], config)


@pytest.mark.parametrize("mode", [Sr3Mode.EXACT, Sr3Mode.INEXACT])
def test_constrained_solve_matches_dense_relaxed_reference(small_problem, mode):
    A, b, tau = small_problem
    L = make_identity(10)
    config = Sr3Config(kappa=1.0, reg=Regularizer.l1_ball(tau), outer_delta=1e-12, max_outer=20000,
                       inner_eps=1e-12, lsqr_atol=1e-13, mode=mode)
    result = sr3_solve(A, L, b, config)
    reference = solve_relaxed_dense(A, L, b, Regularizer.l1_ball(tau), 1.0,
                                    FistaOptions(max_iter=50000, gap_tol=1e-14))
    assert result.converged
    assert np.linalg.norm(result.y - reference.y) <= 1e-6 * np.linalg.norm(reference.y)
    assert np.sum(np.abs(result.y)) <= tau * (1 + 1e-9)
    prox_residual, normal_residual = fixed_point_residuals(A, L, b, config, result)
    assert prox_residual <= 1e-6 and normal_residual <= 1e-6


def test_relaxed_objective_never_increases():
    gen = make_generator(40)
    A = make_dense(standard_normal(gen, (25, 12)) / 5.0)
    L = make_diff_1d(12)
    b = standard_normal(gen, 25)
    for mode in (Sr3Mode.EXACT, Sr3Mode.INEXACT):
        config = Sr3Config(kappa=2.0, reg=Regularizer.l1_penalty(coupled_lambda(0.05, 2.0)),
                           max_outer=200, mode=mode)
        result = sr3_solve(A, L, b, config)
        assert all(decrease >= -1e-10 * (1 + abs(obj))
                   for decrease, obj in zip(result.gap_history, result.objective_history))
        final = relaxed_objective(A, L, b, result.x, result.y, 2.0, config.reg)
        assert final == pytest.approx(result.objective_history[-1])


def test_histories_and_cost_accounting(small_problem):
    A, b, tau = small_problem
    config = Sr3Config(kappa=1.0, reg=Regularizer.l1_ball(tau), max_outer=5)
    result = sr3_solve(A, make_identity(10), b, config)
    frame = result.history_frame()
    assert list(frame.columns) == ['iteration', 'inner_iterations', 'residual', 'gap', 'objective']
    assert len(frame) == result.outer_iterations
    assert result.total_cost == result.total_inner_iterations + result.outer_iterations
    data = result.to_dict(include_vectors=True)
    assert data['method'] == 'sr3-inexact' and len(data['x']) == 10


def test_cap_reports_non_convergence(small_problem):
    A, b, tau = small_problem
    config = Sr3Config(kappa=1.0, reg=Regularizer.l1_ball(tau), max_outer=1, outer_delta=1e-14)
    result = sr3_solve(A, make_identity(10), b, config)
    assert not result.converged and result.stop_reason == "max_outer"
    with pytest.raises(NonConvergenceError):
        result.raise_if_not_converged()


def test_tiny_kappa_recovers_least_squares():
    gen = make_generator(3)
    A = make_dense(np.eye(20) + 0.1 * standard_normal(gen, (20, 20)) / math.sqrt(20))
    b = standard_normal(gen, 20)
    config = Sr3Config(kappa=1e-10, reg=Regularizer.l1_penalty(0.1), mode=Sr3Mode.EXACT,
                       lsqr_atol=1e-14, max_inner=200)
    result = sr3_solve(A, make_identity(20), b, config)
    reference = np.linalg.solve(to_dense(A), b)
    assert np.linalg.norm(result.x - reference) <= 1e-4 * np.linalg.norm(reference)


def test_fista_gap_shrinks_when_iterations_double(diag_problem):
    A = diag_problem.A
    result = fista_solve(A, diag_problem.b, Regularizer.l1_ball(5.0), 1.0 / operator_norm(A) ** 2,
                         max_iter=20000, gap_tol=1e-10)
    gaps = result.gap_history
    k = 4
    checked = 0
    while 2 * k <= len(gaps):
        assert gaps[2 * k - 1] < gaps[k - 1], k
        k *= 2
        checked += 1
    assert checked >= 2


def test_y_is_feasible_after_every_outer_step(small_problem):
    A, b, _ = small_problem
    L = make_dense(to_dense(make_diff_1d(10)))
    x_ls = np.linalg.lstsq(A.matrix, b, rcond=None)[0]
    tau = 0.5 * float(np.sum(np.abs(L.matvec(x_ls))))
    reg = Regularizer.l1_ball(tau)
    for steps in range(1, 9):
        config = Sr3Config(kappa=2.0, reg=reg, outer_delta=1e-15, max_outer=steps)
        result = sr3_solve(A, L, b, config)
        assert np.sum(np.abs(result.y)) <= tau * (1 + 1e-12), steps


def test_inexact_mode_costs_no_more_than_exact_on_tomography():
    problem = tomo_problem(grid=8)
    reg = Regularizer.l1_ball(problem.tau_star)
    totals = {}
    for mode in (Sr3Mode.EXACT, Sr3Mode.INEXACT):
        config = Sr3Config(kappa=1.0, reg=reg, inner_eps=1e-6, lsqr_atol=1e-10, max_outer=300,
                           max_inner=500, mode=mode)
        totals[mode] = sr3_solve(problem.A, problem.L, problem.b, config).total_inner_iterations
    assert totals[Sr3Mode.INEXACT] <= totals[Sr3Mode.EXACT]
