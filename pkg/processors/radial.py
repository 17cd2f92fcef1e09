"""
Interior solver for the radial integro-differential equation and the
closed-form exterior and free log-derivatives.

The interior equation is written for phi = R / sqrt(r), which turns the radial
operator into the two-dimensional flux form (r phi')' / r - m² phi / r². Each
cell j carries the balance

    (j + 1/2)(phi_{j+1} - phi_j) - (j - 1/2)(phi_j - phi_{j-1})
        - vol_j (m²/r_j² + V_j - E) phi_j - vol_j (K phi)_j = 0

with vol_j = r_j h (h²/8 for the origin cell). The regular solution is seeded
with phi_0 = 1 for m = 0 and phi_0 = 0, phi_1 = h^m otherwise; what remains is
a lower-banded system plus the kernel coupling. Log-derivatives follow from
A = R'/R = phi'/phi + 1/(2 r0) throughout.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Tuple, TypeVar

import numpy as np
from scipy.special import kve

from config import Config
from models import DimensionError, DomainError, InteriorSolution, LogDerivative, Side
from processors.potentials import (LocalPotential, NonlocalOperator, PartialWaveProblem, RadialGrid, SaitoProjector,
                                   SymmetricKernel, projector_reduced)
from processors.specfun import bessel_j, i_log_derivative, k_log_derivative
from utils.linalg import (dense_measure, low_rank_capacitance, lower_banded, solve_dense, solve_low_rank,
                          solve_lower_banded, symmetric_factors)

logger = logging.getLogger(__name__)

T = TypeVar('T')


@dataclass
class Coupling:
    """Kernel term of the balance equations on the nodes 0..N.

    Low-rank couplings read left @ diag(coefficients) @ right.T, dense ones
    carry the full matrix.
    """
    left: Optional[np.ndarray] = None
    coefficients: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None
    dense: Optional[np.ndarray] = None

    @property
    def is_empty(self) -> bool:
        return self.dense is None and (self.coefficients is None or self.coefficients.size == 0)


def first_row(m: int) -> int:
    """Index of the first balance row (the origin row exists only for m = 0)"""
    return 0 if m == 0 else 1


def stencil(problem: PartialWaveProblem, energy: float,
            potential: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients (a, b, c) of phi_{j+1}, phi_j, phi_{j-1} on the rows j0..N-1"""
    grid = problem.grid
    m = problem.m
    if potential is None:
        potential = problem.grid_potential()
    rows = np.arange(first_row(m), grid.n_points)
    volumes = grid.volumes[rows]
    upper = rows + 0.5
    lower = np.where(rows > 0, rows - 0.5, 0.0)
    centrifugal = np.where(rows > 0, m ** 2 / np.maximum(rows, 1), 0.0)
    diagonal = -upper - lower - centrifugal - volumes * (potential[rows] - energy)
    return upper, diagonal, lower


def apply_stencil(problem: PartialWaveProblem, energy: float, reduced: np.ndarray,
                  potential: Optional[np.ndarray] = None) -> np.ndarray:
    """Local balance rows applied to phi; zero outside the rows j0..N-1"""
    upper, diagonal, lower = stencil(problem, energy, potential=potential)
    rows = np.arange(first_row(problem.m), problem.grid.n_points)
    previous = np.concatenate([[0.0], reduced[:-1]])
    applied = np.zeros_like(reduced)
    applied[rows] = upper * reduced[rows + 1] + diagonal * reduced[rows] + lower * previous[rows]
    return applied


def reference_operator_row(problem: PartialWaveProblem, projector: SaitoProjector) -> np.ndarray:
    """q = L^T u for the Saito bracket, so that q @ phi = sum_j u_j (L phi)_j"""
    grid = problem.grid
    potential = grid.cell_average(projector.local_ref)
    upper, diagonal, lower = stencil(problem, 0.0, potential=potential)
    reduced = projector_reduced(projector, grid, problem.m)
    rows = np.arange(first_row(problem.m), grid.n_points)
    weights = reduced[rows]
    row = np.zeros(grid.n_points + 1)
    np.add.at(row, rows + 1, weights * upper)
    np.add.at(row, rows, weights * diagonal)
    np.add.at(row, rows[rows > 0] - 1, (weights * lower)[rows > 0])
    return row


def kernel_density(problem: PartialWaveProblem) -> Coupling:
    """Kernel term per unit cell volume: the balance coupling is diag(vol) @ density on phi"""
    op = problem.nonlocal_op
    if op is None or problem.lam == 0.0:
        return Coupling()
    grid = problem.grid
    volumes = grid.volumes
    radii = grid.full_nodes
    if isinstance(op, SymmetricKernel):
        if op.is_separable:
            terms = [t for t in op.terms if t.coefficient != 0.0]
            if not terms:
                return Coupling()
            shapes = np.column_stack([t.shape(radii) for t in terms])
            coefficients = problem.lam * np.array([t.coefficient for t in terms])
            return Coupling(left=shapes, coefficients=coefficients, right=volumes[:, None] * shapes)
        kernel = np.empty((grid.n_points + 1, grid.n_points + 1))
        kernel[1:, 1:] = op.values(grid)
        # origin row and column copy the first node
        kernel[0, 1:] = kernel[1, 1:]
        kernel[1:, 0] = kernel[1:, 1]
        kernel[0, 0] = kernel[1, 1]
        return Coupling(dense=problem.lam * kernel * volumes[None, :])
    if op.u.size != grid.n_points:
        raise DimensionError(f"Saito wavefunction has {op.u.size} values, grid has {grid.n_points}")
    reduced = projector_reduced(op, grid, problem.m)
    right = reference_operator_row(problem, op)[:, None]
    return Coupling(left=reduced[:, None], coefficients=np.array([problem.lam]), right=right)


def coupling(problem: PartialWaveProblem) -> Coupling:
    density = kernel_density(problem)
    volumes = problem.grid.volumes
    if density.dense is not None:
        return Coupling(dense=volumes[:, None] * density.dense)
    if density.is_empty:
        return density
    return Coupling(left=volumes[:, None] * density.left, coefficients=density.coefficients, right=density.right)


def effective_kernel(problem: PartialWaveProblem) -> np.ndarray:
    """lambda K on the nodes 1..N acting on R, exactly as the solver applies it.

    K_jk = sqrt(r_j) G_jk / sqrt(r_k) for the kernel density G on phi, which
    puts the finite-volume weights vol_k / r_k (h inside, 0 at r0) on the
    columns. For m = 0 the origin column is folded onto the first two nodes
    with phi_0 = (4 phi_1 - phi_2) / 3.
    """
    grid = problem.grid
    n = grid.n_points
    density = kernel_density(problem)
    if density.is_empty:
        return np.zeros((n, n))
    if density.dense is not None:
        full = density.dense
    else:
        full = (density.left * density.coefficients) @ density.right.T
    root = np.sqrt(grid.nodes)
    matrix = root[:, None] * full[1:, 1:] / root[None, :]
    if problem.m == 0:
        origin = root * full[1:, 0]
        matrix[:, 0] += origin * 4.0 / (3.0 * root[0])
        matrix[:, 1] -= origin / (3.0 * root[1])
    return matrix


def materialize_kernel(op: NonlocalOperator, grid: RadialGrid, m: int = 0) -> np.ndarray:
    """Grid matrix K acting on R: (K R)_j ≈ sqrt(r_j) ∫ U(r_j, r') R(r') sqrt(r') dr'"""
    return effective_kernel(PartialWaveProblem(m, LocalPotential.zero(grid.r0), op, 1.0, grid.r0, grid))


def _seeded_system(problem: PartialWaveProblem, energy: float, kernel: Optional[Coupling]):
    """Banded local part, right-hand side and kernel rows once the seeds are moved across"""
    grid = problem.grid
    m = problem.m
    n_total = grid.n_points
    j0 = first_row(m)
    upper, diagonal, lower = stencil(problem, energy)

    known = np.arange(0, j0 + 1)
    unknown = np.arange(j0 + 1, n_total + 1)
    seeds = np.array([1.0]) if m == 0 else np.array([0.0, grid.h ** m])

    ab = lower_banded(upper, diagonal[1:], lower[2:])
    rhs = np.zeros(unknown.size)
    rhs[0] -= diagonal[0] * seeds[j0]
    if j0 > 0:
        rhs[0] -= lower[0] * seeds[j0 - 1]
    rhs[1] -= lower[1] * seeds[j0]

    kernel = kernel if kernel is not None else coupling(problem)
    rows = np.arange(j0, n_total)
    if kernel.dense is not None:
        rhs = rhs + kernel.dense[np.ix_(rows, known)] @ seeds
    elif not kernel.is_empty:
        rhs = rhs + kernel.left[rows] @ (kernel.coefficients * (kernel.right[known].T @ seeds))
    return ab, rhs, rows, known, unknown, seeds, kernel


def singularity_measure(problem: PartialWaveProblem, energy: float, kernel: Optional[Coupling] = None) -> float:
    """Relative distance of the seeded interior system from singularity (1 without a kernel)"""
    ab, _, rows, _, unknown, _, kernel = _seeded_system(problem, energy, kernel)
    if kernel.is_empty:
        return 1.0
    if kernel.dense is not None:
        return dense_measure(ab, kernel.dense[np.ix_(rows, unknown)])
    return low_rank_capacitance(ab, kernel.left[rows], kernel.coefficients, kernel.right[unknown])[2]


def low_rank_form(kernel: Coupling) -> Coupling:
    """Low-rank view of a coupling; dense matrices are cut to their numerical rank"""
    if kernel.dense is None:
        return kernel
    vectors, values = symmetric_factors(kernel.dense, Config.KERNEL_RANK_TOLERANCE)
    return Coupling(left=vectors, coefficients=values, right=vectors)


def balance_residual(problem: PartialWaveProblem, energy: float, reduced: np.ndarray,
                     kernel: Coupling) -> np.ndarray:
    """Full balance rows, local part minus kernel coupling, applied to phi"""
    applied = apply_stencil(problem, energy, reduced)
    if kernel.is_empty:
        return applied
    rows = np.arange(first_row(problem.m), problem.grid.n_points)
    if kernel.dense is not None:
        applied[rows] -= kernel.dense[rows] @ reduced
    else:
        applied[rows] -= kernel.left[rows] @ (kernel.coefficients * (kernel.right.T @ reduced))
    return applied


def regular_basis(problem: PartialWaveProblem, energy: float,
                  kernel: Optional[Coupling] = None) -> Tuple[np.ndarray, Coupling]:
    """Columns spanning every regular solution of the full balance rows.

    The first column is the seeded local solution, the others respond to one
    kernel column each with zero seeds. A solution is a combination whose
    kernel amplitudes are self-consistent, so the span stays valid where the
    seeded system itself is singular.
    """
    kernel = low_rank_form(kernel if kernel is not None else coupling(problem))
    ab, rhs, rows, known, unknown, seeds, _ = _seeded_system(problem, energy, Coupling())
    rank = 0 if kernel.is_empty else kernel.coefficients.size
    basis = np.zeros((problem.grid.n_points + 1, 1 + rank))
    basis[known, 0] = seeds
    basis[unknown, 0] = solve_lower_banded(ab, rhs)
    if rank:
        basis[unknown, 1:] = solve_lower_banded(ab, kernel.left[rows])
    return basis, kernel


def solve_reduced(problem: PartialWaveProblem, energy: float,
                  kernel: Optional[Coupling] = None) -> np.ndarray:
    """Regular solution phi on the nodes 0..N, scaled to unit maximum"""
    ab, rhs, rows, known, unknown, seeds, kernel = _seeded_system(problem, energy, kernel)
    if kernel.is_empty:
        solution = solve_lower_banded(ab, rhs)
    elif kernel.dense is not None:
        solution = solve_dense(ab, kernel.dense[np.ix_(rows, unknown)], rhs, energy, Config.SINGULAR_TOLERANCE)
    else:
        solution = solve_low_rank(ab, kernel.left[rows], kernel.coefficients, kernel.right[unknown], rhs, energy,
                                  Config.SINGULAR_TOLERANCE)

    reduced = np.empty(problem.grid.n_points + 1)
    reduced[known] = seeds
    reduced[unknown] = solution
    peak = np.max(np.abs(reduced))
    if not np.isfinite(peak):
        raise DomainError(f"interior solution overflows at E={energy!r}")
    return reduced / peak


def boundary_data(problem: PartialWaveProblem, reduced: np.ndarray) -> Tuple[float, float]:
    """R(r0) and R'(r0) with a one-sided second-order derivative"""
    h = problem.grid.h
    r0 = problem.r0
    slope = (3.0 * reduced[-1] - 4.0 * reduced[-2] + reduced[-3]) / (2.0 * h)
    root = np.sqrt(r0)
    return float(root * reduced[-1]), float(root * slope + reduced[-1] / (2.0 * root))


def count_nodes(reduced: np.ndarray) -> int:
    signs = np.sign(reduced[1:])
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def solve_interior(problem: PartialWaveProblem, energy: float) -> InteriorSolution:
    """Regular solution of the interior equation at energy E"""
    if not np.isfinite(energy):
        raise DomainError(f"energy must be finite, got {energy!r}")
    reduced = solve_reduced(problem, energy)
    value, derivative = boundary_data(problem, reduced)
    return InteriorSolution(
        energy=float(energy),
        radii=problem.grid.full_nodes,
        reduced=reduced,
        volumes=problem.grid.volumes,
        boundary_value=value,
        boundary_derivative=derivative,
        node_count=count_nodes(reduced),
    )


def interior_prufer(problem: PartialWaveProblem, energy: float) -> float:
    reduced = solve_reduced(problem, energy)
    value, derivative = boundary_data(problem, reduced)
    return float(np.arctan2(derivative, value))


def interior_log_derivative(problem: PartialWaveProblem, energy: float) -> LogDerivative:
    solution = solve_interior(problem, energy)
    return LogDerivative(solution.boundary_prufer, Side.INTERIOR, problem.r0)


def zero_energy_limit(m: int, r0: float) -> float:
    """rho_m = (-m + 1/2) / r0"""
    return (0.5 - m) / r0


def exterior_log_derivative(m: int, energy: float, r0: float) -> LogDerivative:
    """Log-derivative of sqrt(r) K_m(kappa r) at r0+, kappa = sqrt(-E)"""
    if energy > 0:
        raise DomainError(f"no decaying exterior solution at E={energy!r} > 0")
    if energy == 0.0:
        value = zero_energy_limit(m, r0)
    else:
        kappa = np.sqrt(-energy)
        value = k_log_derivative(m, kappa * r0) / r0 + 0.5 / r0
    return LogDerivative(float(np.arctan(value)), Side.EXTERIOR, r0)


def free_reference(m: int, energy: float, r0: float) -> LogDerivative:
    """Closed-form interior log-derivative of the free problem"""
    if energy > 0:
        k = np.sqrt(energy)
        j = bessel_j(m, k * r0)
        scaled_derivative = k * j.derivative + j.value / (2.0 * r0)
        return LogDerivative(float(np.arctan2(scaled_derivative, j.value)), Side.INTERIOR, r0)
    if energy == 0.0:
        value = (m + 0.5) / r0
    else:
        kappa = np.sqrt(-energy)
        value = i_log_derivative(m, kappa * r0) / r0 + 0.5 / r0
    return LogDerivative(float(np.arctan(value)), Side.INTERIOR, r0)


def interior_energy_slope(solution: InteriorSolution) -> float:
    """dA/dE = -∫₀^{r0} R² dr / R(r0)²"""
    r0 = solution.radii[-1]
    edge = r0 * solution.reduced[-1] ** 2
    if edge == 0.0:
        return float('-inf')
    return -solution.norm_squared / edge


def exterior_energy_slope(m: int, energy: float, r0: float) -> float:
    """dA/dE = +∫_{r0}^∞ R² dr / R(r0)² for R = sqrt(r) K_m(kappa r)"""
    if energy >= 0:
        raise DomainError(f"exterior slope needs E < 0, got {energy!r}")
    x = np.sqrt(-energy) * r0
    center = kve(m, x)
    return 0.5 * r0 * (kve(m - 1, x) * kve(m + 1, x) / center ** 2 - 1.0)


def wronskian_identity(first: InteriorSolution, second: InteriorSolution) -> Tuple[float, float]:
    """Both sides of [R_a R_b' - R_b R_a']_{r0} = (E_a - E_b) ∫₀^{r0} R_a R_b dr.

    The boundary form is the discrete flux between the last two nodes, so the
    identity holds to rounding for any symmetric kernel.
    """
    radii = first.radii
    h = radii[1] - radii[0]
    midpoint = radii[-1] - 0.5 * h
    a = first.reduced
    b = second.reduced
    boundary = midpoint / h * (b[-1] * a[-2] - a[-1] * b[-2])
    bulk = (first.energy - second.energy) * float(np.sum(first.volumes * a * b))
    return float(boundary), bulk


def parallel_map(func: Callable[[float], T], values: Iterable[float], threads: int = 1) -> List[T]:
    """Ordered map over independent samples; results do not depend on ``threads``"""
    values = list(values)
    if threads <= 1 or len(values) < 2:
        return [func(value) for value in values]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, values))
