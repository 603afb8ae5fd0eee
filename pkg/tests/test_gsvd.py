import math

import numpy as np
import pytest

from sr3_toolkit.errors import RankDeficientError, UnsupportedShapeError
from sr3_toolkit.gsvd import (GsvdRegime, a_weighted_pinv_apply, build_relaxed_system, fk_singular_values,
                              gsvd, hk_singular_values, solve_relaxed_dense, standard_form_solve,
                              standard_form_transform)
from sr3_toolkit.linops import make_dense, make_diff_1d, make_gaussian_random, make_identity, to_dense
from sr3_toolkit.problems import gravity_problem
from sr3_toolkit.prox import Regularizer
from sr3_toolkit.sampling import make_generator, standard_normal
from sr3_toolkit.sr3 import FistaOptions, Sr3Config, Sr3Mode, sr3_solve

SHAPES = {
    'tall': ((8, 5), (3, 5)),
    'wide': ((4, 6), (8, 6)),
}


def _pair(regime, seed):
    (m, n), (p, _) = SHAPES[regime]
    return make_gaussian_random(m, n, seed).matrix, make_gaussian_random(p, n, seed + 1000).matrix


@pytest.mark.parametrize("regime", sorted(SHAPES))
def test_factors_reconstruct_the_pair(regime):
    A, L = _pair(regime, 3)
    f = gsvd(A, L)
    scale = max(np.linalg.norm(A), np.linalg.norm(L))
    assert np.linalg.norm(f.U @ f.sigma_matrix() @ f.X - A) <= 1e-10 * scale
    assert np.linalg.norm(f.V @ f.gamma_matrix() @ f.X - L) <= 1e-10 * scale
    np.testing.assert_allclose(f.U.T @ f.U, np.eye(f.m), atol=1e-12)
    np.testing.assert_allclose(f.V.T @ f.V, np.eye(f.p), atol=1e-12)
    np.testing.assert_allclose(f.sigma ** 2 + f.gamma ** 2, 1.0, atol=1e-12)
    assert f.regime == (GsvdRegime.TALL if regime == 'tall' else GsvdRegime.WIDE)


def test_pairs_are_ordered_by_decreasing_gamma():
    A, L = _pair('tall', 5)
    f = gsvd(A, L)
    assert np.all(np.diff(f.gamma) <= 1e-12)
    assert np.all(np.diff(f.sigma) >= -1e-12)


@pytest.mark.parametrize("regime", sorted(SHAPES))
@pytest.mark.parametrize("kappa", [1e-3, 1.0, 1e3])
def test_fk_closed_form_matches_dense_svd(regime, kappa):
    A, L = _pair(regime, 17)
    b = np.ones(A.shape[0])
    dense = np.linalg.svd(build_relaxed_system(A, L, b, kappa).F_kappa, compute_uv=False)
    closed = fk_singular_values(gsvd(A, L), kappa)
    assert closed.shape == dense.shape
    assert np.max(np.abs(closed - dense)) <= 1e-8 * np.max(dense)


def test_fk_limit_is_generalized_values():
    A, L = _pair('tall', 21)
    f = gsvd(A, L)
    limit = fk_singular_values(f, math.inf)
    finite = limit[np.isfinite(limit)]
    np.testing.assert_allclose(np.sort(finite)[::-1], f.generalized_values(), rtol=1e-12)
    np.testing.assert_allclose(fk_singular_values(f, 1e12)[np.isfinite(limit)], finite, rtol=1e-6)


def test_hk_values_match_eigenvalues():
    A, L = _pair('tall', 2)
    H = A.T @ A + 2.0 * L.T @ L
    np.testing.assert_allclose(hk_singular_values(A, L, 2.0), np.sort(np.linalg.eigvalsh(H))[::-1],
                               rtol=1e-10)


def test_wide_regime_has_sqrt_kappa_plateau():
    A, L = _pair('wide', 9)
    values = fk_singular_values(gsvd(A, L), 4.0)
    assert np.sum(np.abs(values - 2.0) <= 1e-10) >= 8 - 6


def test_short_stack_is_unsupported():
    A = make_gaussian_random(2, 6, 1).matrix
    L = make_gaussian_random(2, 6, 2).matrix
    with pytest.raises(UnsupportedShapeError):
        gsvd(A, L)


def test_shared_null_column_is_rank_deficient():
    A = make_gaussian_random(6, 4, 1).matrix
    L = make_gaussian_random(5, 4, 2).matrix
    A[:, 0] = 0.0
    L[:, 0] = 0.0
    with pytest.raises(RankDeficientError):
        gsvd(A, L)


def test_standard_form_with_identity_is_trivial():
    A = make_gaussian_random(9, 6, 4).matrix
    b = standard_normal(make_generator(1), 9)
    form = standard_form_transform(A, np.eye(6), b)
    np.testing.assert_allclose(form.operator, A, atol=1e-10)
    np.testing.assert_allclose(form.x_null, 0.0, atol=1e-12)


def test_unregularized_standard_form_is_least_squares():
    A = make_gaussian_random(12, 8, 6).matrix
    L = to_dense(make_diff_1d(8))
    b = standard_normal(make_generator(2), 12)
    x = standard_form_solve(A, L, b, Regularizer.none())
    np.testing.assert_allclose(x, np.linalg.lstsq(A, b, rcond=None)[0], rtol=1e-8, atol=1e-10)


def test_pinv_inverts_l_on_its_range():
    A = make_gaussian_random(12, 8, 6).matrix
    L = to_dense(make_diff_1d(8))
    f = gsvd(A, L)
    y = standard_normal(make_generator(3), 7)
    np.testing.assert_allclose(L @ a_weighted_pinv_apply(f, y), y, atol=1e-10)


def test_nullspace_component_lies_in_null_of_l():
    A = make_gaussian_random(12, 8, 6).matrix
    L = to_dense(make_diff_1d(8))
    b = standard_normal(make_generator(4), 12)
    form = standard_form_transform(A, L, b)
    np.testing.assert_allclose(L @ form.x_null, 0.0, atol=1e-10)
    # A-orthogonality of the two solution parts
    np.testing.assert_allclose((A @ form.x_null) @ form.operator, 0.0, atol=1e-9)


def test_relaxed_value_identity():
    A = make_gaussian_random(15, 8, 8).matrix / np.sqrt(15)
    L = to_dense(make_diff_1d(8))
    b = standard_normal(make_generator(5), 15)
    kappa = 3.0
    solution = solve_relaxed_dense(A, L, b, Regularizer.l1_ball(0.5), kappa,
                                   FistaOptions(max_iter=20000, gap_tol=1e-12))
    fit = A @ solution.x - b
    split = L @ solution.x - solution.y
    assert solution.phi ** 2 == pytest.approx(fit @ fit + kappa * split @ split, rel=1e-9)
    assert np.sum(np.abs(solution.y)) <= 0.5 * (1 + 1e-9)


def test_relaxed_system_rejects_large_problems():
    with pytest.raises(ValueError):
        build_relaxed_system(np.zeros((2, 600)), np.eye(600), np.zeros(2), 1.0)


def test_short_a_with_small_l_is_factored_as_tall():
    # m < n with p <= n: every pair with gamma keeps its row of Gamma
    A = make_gaussian_random(4, 6, 12).matrix
    L = make_gaussian_random(5, 6, 13).matrix
    f = gsvd(A, L)
    assert f.regime == GsvdRegime.TALL
    scale = max(np.linalg.norm(A), np.linalg.norm(L))
    assert np.linalg.norm(f.U @ f.sigma_matrix() @ f.X - A) <= 1e-10 * scale
    assert np.linalg.norm(f.V @ f.gamma_matrix() @ f.X - L) <= 1e-10 * scale
    dense = np.linalg.svd(build_relaxed_system(A, L, np.ones(4), 2.0).F_kappa, compute_uv=False)
    assert np.max(np.abs(fk_singular_values(f, 2.0) - dense)) <= 1e-8 * np.max(dense)


def test_relaxed_normal_matrix_is_diagonal_in_v():
    problem = gravity_problem(n=64)
    A, L = to_dense(problem.A), to_dense(problem.L)
    kappa = 10.0
    f = gsvd(A, L)
    F = build_relaxed_system(A, L, problem.b, kappa).F_kappa
    rotated = f.V.T @ (F.T @ F) @ f.V
    off_diagonal = rotated - np.diag(np.diag(rotated))
    assert np.max(np.abs(off_diagonal)) <= 1e-8 * kappa
    np.testing.assert_allclose(np.sort(np.diag(rotated))[::-1], fk_singular_values(f, kappa) ** 2,
                               atol=1e-8 * kappa)


def test_sr3_commutes_with_the_standard_form_map():
    A = make_gaussian_random(20, 12, 31).matrix / np.sqrt(20)
    L = to_dense(make_diff_1d(12))
    b = standard_normal(make_generator(32), 20)
    x_ls = np.linalg.lstsq(A, b, rcond=None)[0]
    reg = Regularizer.l1_ball(0.5 * float(np.sum(np.abs(L @ x_ls))))
    config = Sr3Config(kappa=1.0, reg=reg, mode=Sr3Mode.EXACT, lsqr_atol=1e-13, max_inner=200,
                       outer_delta=1e-14, max_outer=60)

    general = sr3_solve(make_dense(A), make_dense(L), b, config)
    form = standard_form_transform(A, L, b)
    reduced = sr3_solve(make_dense(form.operator), make_identity(11), b - A @ form.x_null, config)
    mapped = a_weighted_pinv_apply(form.factors, reduced.x) + form.x_null

    assert np.linalg.norm(mapped - general.x) <= 1e-7 * np.linalg.norm(general.x)
    assert np.linalg.norm(reduced.y - general.y) <= 1e-7 * max(np.linalg.norm(general.y), 1.0)
