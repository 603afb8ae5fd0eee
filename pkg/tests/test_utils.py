import math

import numpy as np
import pytest

from sr3_toolkit.errors import DimensionMismatchError
from sr3_toolkit.utils import (as_vector, linear_tau_grid, parse_float_list, relative_change, relative_error,
                               validate_count, validate_positive, validate_tau_grid)


def test_as_vector_flattens_single_columns():
    np.testing.assert_array_equal(as_vector([[1], [2]], 2), [1.0, 2.0])
    with pytest.raises(DimensionMismatchError):
        as_vector(np.ones((2, 2)))
    with pytest.raises(DimensionMismatchError):
        as_vector([1.0, 2.0], 3)


def test_scalar_validators():
    assert validate_positive(2, "x") == 2.0
    with pytest.raises(ValueError):
        validate_positive(0.0, "x")
    with pytest.raises(ValueError):
        validate_positive(float('nan'), "x")
    with pytest.raises(ValueError):
        validate_count(2.5, "n")
    assert validate_count(3, "n", minimum=3) == 3


def test_relative_measures():
    assert relative_error(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)
    assert relative_error(np.array([0.0, 2.0]), np.zeros(2)) == pytest.approx(2.0)
    assert relative_change(np.array([0.5]), np.array([0.0])) == pytest.approx(0.5)


def test_tau_grid_validation_collects_errors():
    valid, errors = validate_tau_grid([0.0, 1.0, 2.0])
    assert valid and errors == []
    valid, errors = validate_tau_grid([-1.0, math.inf, 0.5])
    assert not valid and len(errors) == 3
    assert validate_tau_grid([]) == (False, ["tau grid is empty"])


def test_linear_tau_grid():
    assert linear_tau_grid(2.0, 4) == pytest.approx([0.5, 1.0, 1.5, 2.0])
    assert linear_tau_grid(2.0, 3, include_zero=True) == pytest.approx([0.0, 1.0, 2.0])


def test_parse_float_list():
    assert parse_float_list(["1e-2, 1", "inf"]) == [0.01, 1.0, math.inf]
    assert parse_float_list(["", "2,"]) == [2.0]
    with pytest.raises(ValueError):
        parse_float_list(["one"])
