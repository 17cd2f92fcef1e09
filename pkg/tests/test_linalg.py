import numpy as np
import pytest

from models import DimensionError, SingularSystemError
from utils.linalg import (banded_to_dense, dense_measure, lower_banded, solve_dense, solve_low_rank,
                          solve_lower_banded)


@pytest.fixture
def banded():
    rng = np.random.default_rng(7)
    n = 40
    return lower_banded(4.0 + rng.random(n), rng.random(n - 1), rng.random(n - 2)), rng


def test_banded_solve(banded):
    ab, rng = banded
    rhs = rng.standard_normal(ab.shape[1])
    assert np.allclose(banded_to_dense(ab) @ solve_lower_banded(ab, rhs), rhs)


def test_low_rank_update_matches_dense_solve(banded):
    ab, rng = banded
    n = ab.shape[1]
    left = rng.standard_normal((n, 2))
    right = rng.standard_normal((n, 2))
    coefficients = np.array([0.3, -0.2])
    rhs = rng.standard_normal(n)
    matrix = banded_to_dense(ab) - left @ np.diag(coefficients) @ right.T
    solution = solve_low_rank(ab, left, coefficients, right, rhs, 0.0, 1e-12)
    assert np.allclose(solution, np.linalg.solve(matrix, rhs))
    dense = solve_dense(ab, left @ np.diag(coefficients) @ right.T, rhs, 0.0, 1e-12)
    assert np.allclose(dense, solution)


def test_singular_update_is_reported(banded):
    ab, rng = banded
    n = ab.shape[1]
    left = rng.standard_normal((n, 1))
    right = rng.standard_normal((n, 1))
    coefficient = 1.0 / float(right[:, 0] @ solve_lower_banded(ab, left[:, 0]))
    with pytest.raises(SingularSystemError) as excinfo:
        solve_low_rank(ab, left, np.array([coefficient]), right, np.ones(n), -1.5, 1e-9)
    assert excinfo.value.energy == -1.5
    assert excinfo.value.measure < 1e-9


def test_dense_measure_of_a_regular_matrix(banded):
    ab, _ = banded
    assert dense_measure(ab, np.zeros((ab.shape[1], ab.shape[1]))) > 0.1


def test_band_lengths_are_checked():
    with pytest.raises(DimensionError):
        lower_banded(np.ones(5), np.ones(5), np.ones(3))
