"""
Linear solves for the discretized interior operator.

The local part of the operator is lower banded with two sub-diagonals once the
regular seed values are moved to the right-hand side, so it is solved by
forward elimination through ``solve_banded``. Separable and Saito kernels add
a low-rank term handled with the Woodbury identity; tabulated kernels fall
back to a dense LU factorization.
"""
import logging
from typing import Tuple

import numpy as np
from scipy.linalg import eigh, lu_factor, lu_solve, solve, solve_banded

from models import DimensionError, SingularSystemError

logger = logging.getLogger(__name__)


def lower_banded(diagonal: np.ndarray, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Pack a lower banded matrix in the (2, 0) layout of ``solve_banded``.

    ``first[i]`` is entry (i + 1, i), ``second[i]`` entry (i + 2, i).
    """
    n = diagonal.size
    if first.size != n - 1 or second.size != n - 2:
        raise DimensionError(f"band lengths {first.size}, {second.size} do not match order {n}")
    ab = np.zeros((3, n))
    ab[0] = diagonal
    ab[1, :-1] = first
    ab[2, :-2] = second
    return ab


def banded_to_dense(ab: np.ndarray) -> np.ndarray:
    n = ab.shape[1]
    dense = np.diag(ab[0])
    dense += np.diag(ab[1, :-1], -1)
    dense += np.diag(ab[2, :-2], -2)
    return dense


def solve_lower_banded(ab: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return solve_banded((2, 0), ab, rhs, check_finite=False)


def low_rank_capacitance(ab: np.ndarray, left: np.ndarray, coefficients: np.ndarray,
                         right: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """Capacitance matrix of T - left @ diag(coefficients) @ right.T.

    Returns the solved columns T^-1 left, the capacitance matrix and its
    relative singularity measure (smallest singular value over the scale of
    the two terms it is built from).
    """
    if left.shape != right.shape or left.shape[1] != coefficients.size:
        raise DimensionError(f"low-rank factors {left.shape}, {right.shape} and {coefficients.size} coefficients")
    solved = solve_lower_banded(ab, left)
    coupling = right.T @ solved
    capacitance = np.diag(1.0 / coefficients) - coupling
    scale = max(1.0, float(np.max(np.abs(1.0 / coefficients))), float(np.linalg.norm(coupling, 2)))
    singular_values = np.linalg.svd(capacitance, compute_uv=False)
    return solved, capacitance, float(singular_values[-1] / scale)


def solve_low_rank(ab: np.ndarray, left: np.ndarray, coefficients: np.ndarray, right: np.ndarray,
                   rhs: np.ndarray, energy: float, tolerance: float) -> np.ndarray:
    """Solve (T - left @ diag(c) @ right.T) x = rhs with the Woodbury identity"""
    if coefficients.size == 0:
        return solve_lower_banded(ab, rhs)
    solved, capacitance, measure = low_rank_capacitance(ab, left, coefficients, right)
    if measure < tolerance:
        raise SingularSystemError(energy, measure)
    base = solve_lower_banded(ab, rhs)
    return base + solved @ solve(capacitance, right.T @ base, check_finite=False)


def _pivot_ratio(factors: np.ndarray) -> float:
    pivot_sizes = np.abs(np.diag(factors))
    return float(pivot_sizes.min() / pivot_sizes.max())


def dense_measure(ab: np.ndarray, coupling: np.ndarray) -> float:
    """Pivot ratio of the LU factors of T - coupling"""
    return _pivot_ratio(lu_factor(banded_to_dense(ab) - coupling, check_finite=False)[0])


def solve_dense(ab: np.ndarray, coupling: np.ndarray, rhs: np.ndarray, energy: float,
                tolerance: float) -> np.ndarray:
    """Solve (T - coupling) x = rhs for a full coupling matrix"""
    n = ab.shape[1]
    if coupling.shape != (n, n):
        raise DimensionError(f"coupling matrix {coupling.shape} does not match order {n}")
    factors, pivots = lu_factor(banded_to_dense(ab) - coupling, check_finite=False)
    measure = _pivot_ratio(factors)
    if measure < tolerance:
        raise SingularSystemError(energy, measure)
    logger.debug(f"dense interior solve, order {n}, pivot ratio {measure:.3e}")
    return lu_solve((factors, pivots), rhs, check_finite=False)


def symmetric_factors(matrix: np.ndarray, tolerance: float) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvectors and eigenvalues of a symmetric matrix above ``tolerance`` times the largest"""
    values, vectors = eigh(matrix, check_finite=False)
    if values.size == 0:
        return vectors, values
    keep = np.abs(values) > tolerance * np.max(np.abs(values))
    logger.debug(f"symmetric factors: rank {int(np.count_nonzero(keep))} of {values.size}")
    return vectors[:, keep], values[keep]
