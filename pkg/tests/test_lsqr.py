import numpy as np
import pytest

from sr3_toolkit.errors import DimensionMismatchError
from sr3_toolkit.linops import make_diff_1d, make_gravity, make_scaled_stack, to_dense
from sr3_toolkit.lsqr import LsqrOptions, LsqrStopReason, lsqr_solve, lsqr_solve_shifted
from sr3_toolkit.sampling import make_generator, standard_normal


@pytest.fixture
def tall_system(random_operator):
    A = random_operator(30, 10, seed=4)
    b = standard_normal(make_generator(8), 30)
    return A, b


def test_matches_dense_least_squares(tall_system):
    A, b = tall_system
    x, stats = lsqr_solve(A, b, LsqrOptions(atol=1e-14, max_iter=200))
    reference = np.linalg.lstsq(A.matrix, b, rcond=None)[0]
    assert np.linalg.norm(x - reference) <= 1e-8 * np.linalg.norm(reference)
    assert stats.stop_reason == LsqrStopReason.ATOL
    assert stats.final_residual_norm == pytest.approx(np.linalg.norm(A.matrix @ reference - b), rel=1e-6)


def test_matrix_free_stack_matches_dense():
    A, L = make_gravity(12), make_diff_1d(12)
    stacked = make_scaled_stack(A, L, 2.0)
    rhs = np.concatenate([np.ones(12), np.linspace(-1.0, 1.0, 11)])
    x, _ = lsqr_solve(stacked, rhs, LsqrOptions(atol=1e-14, max_iter=500))
    reference = np.linalg.lstsq(to_dense(stacked), rhs, rcond=None)[0]
    assert np.linalg.norm(x - reference) <= 1e-8 * np.linalg.norm(reference)


def test_zero_rhs_returns_zero_without_iterating(tall_system):
    A, _ = tall_system
    x, stats = lsqr_solve(A, np.zeros(30))
    np.testing.assert_array_equal(x, np.zeros(10))
    assert stats.iterations == 0


def test_callback_stops_and_sees_iterates(tall_system):
    A, b = tall_system
    seen = []

    def visitor(itn, x):
        seen.append((itn, x))
        return itn == 3

    x, stats = lsqr_solve(A, b, LsqrOptions(atol=1e-14, callback=visitor))
    assert stats.iterations == 3
    assert stats.stop_reason == LsqrStopReason.CALLBACK
    assert [itn for itn, _ in seen] == [1, 2, 3]
    np.testing.assert_array_equal(seen[-1][1], x)


def test_iteration_cap(tall_system):
    A, b = tall_system
    _, stats = lsqr_solve(A, b, LsqrOptions(atol=0.0, max_iter=4))
    assert stats.iterations == 4
    assert stats.stop_reason == LsqrStopReason.MAX_ITER


def test_default_cap_is_twice_the_columns():
    assert LsqrOptions().iteration_cap(7) == 14
    assert LsqrOptions(max_iter=3).iteration_cap(7) == 3


def test_residual_is_monotone(tall_system):
    A, b = tall_system
    norms = []
    lsqr_solve(A, b, LsqrOptions(atol=1e-14, callback=lambda itn, x: norms.append(
        np.linalg.norm(A.matvec(x) - b)) and False))
    assert all(later <= earlier + 1e-12 for earlier, later in zip(norms, norms[1:]))


def test_shifted_start_at_solution_stays_put(tall_system):
    A, b = tall_system
    reference = np.linalg.lstsq(A.matrix, b, rcond=None)[0]
    x, stats = lsqr_solve_shifted(A, b, reference, LsqrOptions(atol=1e-10))
    np.testing.assert_allclose(x, reference, atol=1e-12)
    assert stats.iterations <= 1


def test_shifted_callback_receives_full_iterate(tall_system):
    A, b = tall_system
    start = np.ones(10)
    seen = []
    x, _ = lsqr_solve_shifted(A, b, start, LsqrOptions(
        atol=1e-14, callback=lambda itn, full: seen.append(full) or itn == 2))
    np.testing.assert_array_equal(seen[-1], x)
    assert np.linalg.norm(A.matvec(x) - b) < np.linalg.norm(A.matvec(start) - b)


def test_length_mismatch_raises(tall_system):
    A, _ = tall_system
    with pytest.raises(DimensionMismatchError):
        lsqr_solve(A, np.ones(29))
    with pytest.raises(DimensionMismatchError):
        lsqr_solve_shifted(A, np.ones(30), np.ones(9))


def test_invalid_options_raise():
    with pytest.raises(ValueError):
        LsqrOptions(atol=-1.0)
    with pytest.raises(ValueError):
        LsqrOptions(max_iter=0)


def test_callback_runs_on_every_step_including_the_last(tall_system):
    A, b = tall_system
    seen = []
    x, stats = lsqr_solve(A, b, LsqrOptions(atol=1e-10, callback=lambda itn, x: seen.append(itn) and False))
    assert stats.stop_reason == LsqrStopReason.ATOL
    assert seen == list(range(1, stats.iterations + 1))


def test_shifted_start_near_solution_beats_cold_start(random_operator):
    A = random_operator(30, 15, seed=21)
    b = standard_normal(make_generator(22), 30)
    reference = np.linalg.lstsq(A.matrix, b, rcond=None)[0]
    start = reference + 1e-9 * standard_normal(make_generator(23), 15)
    options = LsqrOptions(atol=1e-10, max_iter=200)

    _, cold = lsqr_solve(A, b, options)
    x, warm = lsqr_solve_shifted(A, b, start, options)
    assert warm.iterations < cold.iterations
    np.testing.assert_allclose(x, reference, atol=1e-8)
