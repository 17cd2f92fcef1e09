"""
Phase shifts above threshold, their branch under the lambda continuation, the
small-momentum model and positive-energy bound states.

The matching formula is evaluated on the Prüfer angle theta of the interior
solution:

    tan eta = (sin(theta) J - cos(theta) D_J) / (sin(theta) N - cos(theta) D_N)

with D_B = k B'(k r0) + B(k r0) / (2 r0). The denominator vanishes exactly when
theta - theta_N crosses a multiple of pi, theta_N = atan2(D_N, N), so the
unwrapped phase is eta_mod - pi * floor((theta - theta_N) / pi) up to the
lambda = 0 anchor. Prüfer angles are tracked modulo pi because only the line
through (R, R') enters the matching.
"""
import logging
import math
from dataclasses import replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from config import Config
from models import (DomainError, JumpConvention, LogDerivative, NonConvergenceError, PhaseShiftCurve,
                    PositiveBoundRecord, RefinementLimitError, SingularSystemError)
from processors.potentials import (LocalPotential, PartialWaveProblem, RadialGrid, SeparableTerm, SymmetricKernel,
                                   max_effective_strength)
from processors.radial import (Coupling, apply_stencil, balance_residual, boundary_data, coupling, first_row,
                               interior_prufer, low_rank_form, parallel_map, regular_basis, zero_energy_limit)
from processors.specfun import bessel_j, bessel_n

logger = logging.getLogger(__name__)


def wrap_half(angle):
    """Representative of angle modulo pi in (-pi/2, pi/2]"""
    return angle - np.pi * np.ceil(angle / np.pi - 0.5)


def _free_boundary(m: int, k: float, r0: float) -> Tuple[float, float, float, float]:
    """J, D_J, N, D_N at k r0; N and D_N are replaced by their direction when they overflow"""
    x = k * r0
    j = bessel_j(m, x)
    n = bessel_n(m, x)
    d_j = k * j.derivative + j.value / (2.0 * r0)
    d_n = k * n.derivative + n.value / (2.0 * r0)
    if not (np.isfinite(n.value) and np.isfinite(d_n)):
        # N_m -> -inf with log-derivative rho_m
        return j.value, d_j, 0.0, 0.0
    return j.value, d_j, n.value, d_n


def neumann_angle(m: int, k: float, r0: float) -> float:
    """theta_N = atan2(D_N, N): the interior angle at which tan eta has a pole"""
    _, _, n, d_n = _free_boundary(m, k, r0)
    if n == 0.0 and d_n == 0.0:
        return float(np.arctan2(-zero_energy_limit(m, r0), -1.0))
    return float(np.arctan2(d_n, n))


def _eta_mod(theta: float, m: int, k: float, r0: float) -> float:
    j, d_j, n, d_n = _free_boundary(m, k, r0)
    numerator = np.sin(theta) * j - np.cos(theta) * d_j
    if n == 0.0 and d_n == 0.0:
        return 0.0
    denominator = np.sin(theta) * n - np.cos(theta) * d_n
    if denominator == 0.0:
        return np.pi / 2
    return float(np.arctan(numerator / denominator))


def phase_shift_mod_pi(log_derivative: LogDerivative, k: float, m: int, r0: float) -> float:
    """Principal value of the matched phase shift in (-pi/2, pi/2]"""
    if k <= 0:
        raise DomainError(f"momentum must be positive, got {k!r}")
    return _eta_mod(log_derivative.prufer, m, k, r0)


def _continuous_phase(theta: float, m: int, k: float, r0: float, theta_n: float) -> float:
    """eta_mod with the branch index folded in; continuous and decreasing in theta"""
    return _eta_mod(theta, m, k, r0) - np.pi * np.floor((theta - theta_n) / np.pi)


def phase_derivative_wrt_log_derivative(log_derivative: float, k: float, m: int, r0: float) -> float:
    """d eta / dA at fixed k: -8 r0 cos² eta / (pi (2 r0 A N - 2 k r0 N' - N)²)"""
    x = k * r0
    j = bessel_j(m, x)
    n = bessel_n(m, x)
    a = log_derivative
    d_j = k * j.derivative + j.value / (2.0 * r0)
    d_n = k * n.derivative + n.value / (2.0 * r0)
    eta = np.arctan2(a * j.value - d_j, a * n.value - d_n)
    denominator = 2.0 * r0 * a * n.value - 2.0 * x * n.derivative - n.value
    return float(-8.0 * r0 * np.cos(eta) ** 2 / (np.pi * denominator ** 2))


def track_prufer(evaluate: Callable[[float], float], values: Sequence[float], max_step: float,
                 fine_step: Optional[float] = None, near_event: Optional[Callable[[float], bool]] = None,
                 threads: int = 1, max_refinements: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Follow an angle defined modulo pi along a parameter path.

    Every interval is split at least once. It is accepted when both halves
    move by at most ``max_step`` (``fine_step`` where ``near_event`` holds)
    and the two half steps land on the same lift as the direct step; a move
    of nearly pi therefore cannot alias to a small one. Returns the refined
    parameters and the lifted angles.
    """
    values = np.asarray(values, dtype=float)
    max_refinements = Config.MAX_REFINEMENTS if max_refinements is None else max_refinements
    angles = parallel_map(evaluate, values, threads)
    parameters = [values[0]]
    lifted = [float(angles[0])]

    def refine(a: float, theta_a: float, b: float, theta_b_raw: float, depth: int) -> None:
        middle = 0.5 * (a + b)
        theta_m_raw = evaluate(middle)
        theta_m = theta_a + wrap_half(theta_m_raw - theta_a)
        theta_b = theta_m + wrap_half(theta_b_raw - theta_m)
        direct = theta_a + wrap_half(theta_b_raw - theta_a)
        limit = max_step
        if fine_step is not None and near_event is not None and any(
                near_event(theta) for theta in (theta_a, theta_m, theta_b)):
            limit = fine_step
        halves = max(abs(theta_m - theta_a), abs(theta_b - theta_m))
        if halves <= limit and abs(theta_b - direct) < 0.5 * np.pi:
            parameters.extend([middle, b])
            lifted.extend([theta_m, theta_b])
            return
        if depth >= max_refinements:
            raise RefinementLimitError(
                f"angle moves by {theta_b - theta_a:.3f} rad between {a!r} and {b!r} after {depth} halvings")
        refine(a, theta_a, middle, theta_m_raw, depth + 1)
        refine(middle, lifted[-1], b, theta_b_raw, depth + 1)

    for index in range(values.size - 1):
        refine(values[index], lifted[-1], values[index + 1], angles[index + 1], 0)
    return np.array(parameters), np.array(lifted)


def _check_lambda_grid(lambda_grid: np.ndarray) -> None:
    if lambda_grid.size < 2 or lambda_grid[0] != 0.0 or lambda_grid[-1] != 1.0:
        raise DomainError("lambda grid must start at 0 and end at 1")
    if np.any(np.diff(lambda_grid) <= 0):
        raise DomainError("lambda grid must be strictly increasing")


def phase_along_path(problem: PartialWaveProblem, k: float, path: Sequence[float],
                     threads: int = 1) -> PhaseShiftCurve:
    """Continuous phase shift along a lambda path starting at 0 (the path may turn back)"""
    if k <= 0:
        raise DomainError(f"momentum must be positive, got {k!r}")
    if path[0] != 0.0:
        raise DomainError("lambda path must start at 0")
    energy = k * k
    r0 = problem.r0
    m = problem.m
    base = replace(problem, lam=1.0)

    def evaluate(lam: float) -> float:
        return interior_prufer(replace(base, lam=problem.lam * lam), energy)

    lambdas, thetas = track_prufer(evaluate, path, Config.MAX_THETA_STEP, threads=threads)
    theta_n = neumann_angle(m, k, r0)
    anchor = _continuous_phase(thetas[0], m, k, r0, theta_n)
    eta = np.array([_continuous_phase(theta, m, k, r0, theta_n) for theta in thetas]) - anchor
    return PhaseShiftCurve(m, 'lambda', lambdas, eta, wrap_half(eta), thetas, fixed_value=k)


def continue_in_lambda(problem: PartialWaveProblem, k: float, lambda_grid: Optional[Sequence[float]] = None,
                       threads: int = 1) -> PhaseShiftCurve:
    """Phase shift at fixed k followed from lambda = 0, where it vanishes, to lambda = 1"""
    if lambda_grid is None:
        lambda_grid = np.linspace(0.0, 1.0, Config.LAMBDA_POINTS)
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    _check_lambda_grid(lambda_grid)
    return phase_along_path(problem, k, lambda_grid, threads=threads)


def phase_shift(problem: PartialWaveProblem, k: float) -> float:
    """Unwrapped phase shift at lambda = 1"""
    return float(continue_in_lambda(problem, k).eta[-1])


def _free_offset(problem: PartialWaveProblem, k: float) -> float:
    free = replace(problem, lam=0.0)
    return _eta_mod(interior_prufer(free, k * k), problem.m, k, problem.r0)


def _jump_count(k: float, records: Sequence[PositiveBoundRecord]) -> int:
    return sum(1 for record in records if record.energy < k * k)


def phase_curve_k(problem: PartialWaveProblem, k_values: Sequence[float],
                  convention: JumpConvention = JumpConvention.JUMP_BY_PI,
                  positive_bound: Sequence[PositiveBoundRecord] = (), threads: int = 1) -> PhaseShiftCurve:
    """Phase shift over a momentum grid at the problem's lambda.

    The first point is anchored by the lambda continuation; the rest follow by
    continuity in k. Under ``jump_by_pi`` each positive-energy bound state below
    k² adds pi.
    """
    k_values = np.asarray(k_values, dtype=float)
    if k_values.size == 0 or np.any(k_values <= 0) or np.any(np.diff(k_values) <= 0):
        raise DomainError("k grid must be positive and strictly increasing")
    m = problem.m
    r0 = problem.r0

    def principal(k: float) -> float:
        theta = interior_prufer(problem, k * k)
        return float(wrap_half(_eta_mod(theta, m, k, r0) - _free_offset(problem, k)))

    refined, lifted = track_prufer(principal, k_values, Config.MAX_THETA_STEP, threads=threads)
    anchor = continue_in_lambda(problem, float(k_values[0]), threads=threads).eta[-1]
    lifted = lifted + np.pi * np.round((anchor - lifted[0]) / np.pi)
    keep = np.isin(refined, k_values)
    eta = lifted[keep]
    if convention is JumpConvention.JUMP_BY_PI and positive_bound:
        eta = eta + np.pi * np.array([_jump_count(k, positive_bound) for k in k_values])
    thetas = np.array(parallel_map(lambda k: interior_prufer(problem, k * k), k_values, threads))
    return PhaseShiftCurve(m, 'k', k_values, eta, wrap_half(eta), thetas, fixed_value=problem.lam,
                           convention=convention)


def eta_zero_detail(problem: PartialWaveProblem, convention: JumpConvention = JumpConvention.JUMP_BY_PI,
                    positive_bound: Sequence[PositiveBoundRecord] = (),
                    threads: int = 1) -> Tuple[float, float, float]:
    """(n pi, unrounded phase, k used) from the lambda continuation at small k"""
    r0 = problem.r0
    k = Config.K_EVAL_START / r0
    k_stop = Config.K_EVAL_STOP / r0
    raw = np.nan
    while k >= k_stop * (1.0 - 1e-9):
        raw = phase_shift_curve_end(problem, k, threads)
        if convention is JumpConvention.JUMP_BY_PI:
            raw += np.pi * _jump_count(k, positive_bound)
        multiple = np.round(raw / np.pi)
        distance = abs(raw - multiple * np.pi)
        logger.debug(f"eta at k={k:.1e}: {raw:.6f} (distance {distance:.3e} from {multiple:.0f} pi)")
        if distance < Config.ETA_ZERO_TOLERANCE:
            return float(multiple * np.pi), float(raw), float(k)
        k /= 10.0
    raise NonConvergenceError(f"phase shift {raw!r} still ambiguous at k={k_stop!r}")


def phase_shift_curve_end(problem: PartialWaveProblem, k: float, threads: int = 1) -> float:
    return float(continue_in_lambda(problem, k, threads=threads).eta[-1])


def eta_zero(problem: PartialWaveProblem, convention: JumpConvention = JumpConvention.JUMP_BY_PI,
             positive_bound: Sequence[PositiveBoundRecord] = (), threads: int = 1) -> float:
    """Zero-momentum phase shift, a multiple of pi"""
    return eta_zero_detail(problem, convention, positive_bound, threads)[0]


def small_k_model(m: int, a0: float, k: float, r0: float, c2: float = 0.0) -> float:
    """Leading small-momentum form of tan eta for zero-energy log-derivative a0"""
    x = k * r0
    if k <= 0 or x >= 0.1:
        raise DomainError(f"small-k model needs 0 < k r0 < 0.1, got {x!r}")
    rho = zero_energy_limit(m, r0)
    if m >= 2:
        prefactor = -np.pi * x ** (2 * m) / (2 ** (2 * m) * math.factorial(m) * math.factorial(m - 1))
        return float(prefactor * (a0 - (m + 0.5) / r0)
                     / (a0 - c2 * k ** 2 - rho * (1.0 - x ** 2 / ((m - 1) * (2 * m - 1)))))
    if m == 1:
        return float(-np.pi * x ** 2 / 4.0 * (a0 - 1.5 / r0)
                     / (a0 - c2 * k ** 2 - rho * (1.0 + 2.0 * x ** 2 * np.log(x))))
    log_x = np.log(x)
    return float(np.pi / (2.0 * log_x) * (a0 - c2 * k ** 2 - rho * (1.0 - x ** 2))
                 / (a0 - c2 * k ** 2 - rho * (1.0 + 2.0 / log_x)))


def fit_c2(m: int, a0: float, r0: float, samples: Sequence[Tuple[float, float]]) -> float:
    """Next-order coefficient c² fitted to (k, tan eta) samples, averaged over the samples"""
    rho = zero_energy_limit(m, r0)
    estimates = []
    for k, tan_eta in samples:
        x = k * r0
        if m == 0:
            log_x = np.log(x)
            prefactor = np.pi / (2.0 * log_x)
            upper = a0 - rho * (1.0 - x ** 2)
            lower = a0 - rho * (1.0 + 2.0 / log_x)
            shift = (prefactor * upper - tan_eta * lower) / (prefactor - tan_eta)
        else:
            if m == 1:
                prefactor = -np.pi * x ** 2 / 4.0 * (a0 - 1.5 / r0)
                reference = rho * (1.0 + 2.0 * x ** 2 * np.log(x))
            else:
                prefactor = (-np.pi * x ** (2 * m) / (2 ** (2 * m) * math.factorial(m) * math.factorial(m - 1))
                             * (a0 - (m + 0.5) / r0))
                reference = rho * (1.0 - x ** 2 / ((m - 1) * (2 * m - 1)))
            shift = a0 - reference - prefactor / tan_eta
        estimates.append(shift / k ** 2)
    return float(np.mean(estimates))


def _orthonormal_states(problem: PartialWaveProblem, energy: float, kernel: Coupling) -> np.ndarray:
    """Regular solutions as columns, orthonormal in the rms norm over the interior"""
    basis, _ = regular_basis(problem, energy, kernel)
    weights = np.sqrt(problem.grid.volumes / problem.r0)
    _, singular_values, right_t = np.linalg.svd(weights[:, None] * basis, full_matrices=False)
    keep = singular_values > Config.KERNEL_RANK_TOLERANCE * singular_values[0]
    return basis @ (right_t[keep].T / singular_values[keep])


def _scaled_residuals(problem: PartialWaveProblem, energy: float, states: np.ndarray, kernel: Coupling,
                      energy_scale: float) -> np.ndarray:
    """Balance rows applied to each state, per unit cell volume and energy scale"""
    rows = np.arange(first_row(problem.m), problem.grid.n_points)
    residuals = np.column_stack([balance_residual(problem, energy, state, kernel)[rows] for state in states.T])
    return residuals / (problem.grid.volumes[rows] * energy_scale)[:, None]


def _energy_scale(problem: PartialWaveProblem) -> float:
    return max_effective_strength(problem) + 1.0 / problem.r0 ** 2


def constrained_defect(problem: PartialWaveProblem, energy: float, kernel: Optional[Coupling] = None,
                       energy_scale: Optional[float] = None) -> Tuple[float, np.ndarray]:
    """Overdetermination defect of a regular solution with R(r0) = R'(r0) = 0.

    The balance rows and the two boundary values phi_N, phi_{N-1} are stacked
    over an orthonormal basis of regular solutions. The smallest singular value
    vanishes exactly when one solution satisfies all of them; it is returned
    together with that solution.
    """
    kernel = low_rank_form(kernel if kernel is not None else coupling(problem))
    if energy_scale is None:
        energy_scale = abs(energy) + _energy_scale(problem)
    states = _orthonormal_states(problem, energy, kernel)
    system = np.vstack([_scaled_residuals(problem, energy, states, kernel, energy_scale), states[-1], states[-2]])
    _, singular_values, right_t = np.linalg.svd(system, full_matrices=False)
    return float(singular_values[-1]), states @ right_t[-1]


def _regular_prufer(problem: PartialWaveProblem, energy: float, kernel: Coupling, energy_scale: float) -> float:
    """Interior angle, taken from the regular-solution basis where the seeded system is singular"""
    try:
        return interior_prufer(problem, energy)
    except SingularSystemError:
        kernel = low_rank_form(kernel)
        states = _orthonormal_states(problem, energy, kernel)
        _, _, right_t = np.linalg.svd(_scaled_residuals(problem, energy, states, kernel, energy_scale),
                                      full_matrices=False)
        value, derivative = boundary_data(problem, states @ right_t[-1])
        return float(np.arctan2(derivative, value))


def detect_positive_energy_bound(problem: PartialWaveProblem, energies: Sequence[float],
                                 threads: int = 1) -> List[PositiveBoundRecord]:
    """Positive energies where a regular solution vanishes together with its slope at r0.

    Local minima of the constrained defect on the grid are refined with Brent's
    method; those below the detection threshold become records.
    """
    energies = np.asarray(energies, dtype=float)
    if energies.size < 2 or np.any(energies <= 0) or np.any(np.diff(energies) <= 0):
        raise DomainError("energy grid must be positive and strictly increasing")
    if problem.nonlocal_op is None or problem.lam == 0.0:
        logger.info("No non-local term: positive-energy bound states cannot occur")
        return []
    kernel = low_rank_form(coupling(problem))
    base_scale = _energy_scale(problem)

    def defect(energy: float) -> float:
        return constrained_defect(problem, energy, kernel, base_scale + abs(energy))[0]

    values = np.array(parallel_map(defect, energies, threads))
    records: List[PositiveBoundRecord] = []
    for index in range(1, energies.size - 1):
        if not (values[index] < values[index - 1] and values[index] < values[index + 1]):
            continue
        bracket = (energies[index - 1], energies[index], energies[index + 1])
        result = minimize_scalar(defect, bracket=bracket, method='brent', tol=1e-14)
        energy, residual = float(result.x), float(result.fun)
        logger.debug(f"Defect minimum {residual:.3e} at E={energy:.12g}")
        if residual >= Config.PEBS_DEFECT:
            continue
        record = PositiveBoundRecord(energy, residual, JumpConvention.JUMP_BY_PI,
                                     window=Config.PEBS_WINDOW * energy)
        record.phase_rise = local_phase_rise(problem, record, threads=threads)
        logger.info(f"Positive-energy bound state at E={energy:.12g} (defect {residual:.3e}, "
                    f"rise {record.phase_rise:.4f})")
        records.append(record)
    return records


def _phase_change(problem: PartialWaveProblem, k_lo: float, k_hi: float, threads: int = 1) -> float:
    """Continuous change of the phase shift from k_lo to k_hi"""
    kernel = coupling(problem)
    base_scale = _energy_scale(problem)

    def principal(k: float) -> float:
        theta = _regular_prufer(problem, k * k, kernel, base_scale + k * k)
        return float(_eta_mod(theta, problem.m, k, problem.r0))

    _, lifted = track_prufer(principal, [k_lo, k_hi], Config.MAX_THETA_STEP, threads=threads)
    return float(lifted[-1] - lifted[0])


def local_phase_rise(problem: PartialWaveProblem, record: PositiveBoundRecord, threads: int = 1) -> float:
    """Phase step of the resonance a slightly weakened kernel makes of the state.

    At exact tuning the continuous phase is smooth through E0. Scaling the
    kernel by 1 - PEBS_DETUNING turns the state into a narrow resonance, and
    the difference between the two curves across E0 +- window is its rise.
    """
    window = min(record.window or Config.PEBS_WINDOW * record.energy, 0.5 * record.energy)
    k_lo = float(np.sqrt(record.energy - window))
    k_hi = float(np.sqrt(record.energy + window))
    factor = 1.0 - Config.PEBS_DETUNING
    # depth compensates lambda so that only the kernel changes
    detuned = replace(problem, lam=problem.lam * factor, depth=problem.depth / factor)
    return _phase_change(detuned, k_lo, k_hi, threads) - _phase_change(problem, k_lo, k_hi, threads)


def default_positive_energies(problem: PartialWaveProblem, points: int = 400) -> np.ndarray:
    """Scan grid for positive-energy bound states"""
    top = 4.0 * max_effective_strength(problem) + 100.0 / problem.r0 ** 2
    return np.linspace(top / points, top, points)


def tuned_positive_energy_kernel(m: int, r0: float, energy: float, grid_points: int, support: float = 0.6,
                                 local: Optional[LocalPotential] = None) -> SymmetricKernel:
    """Rank-1 kernel whose grid problem has a bound state at ``energy`` > 0.

    The state is phi = (r/a)^m (1 - (r/a)²)² inside a = support * r0 and zero
    outside, so R and R' both vanish at r0. The kernel factor is the balance
    residual of the local operator on that profile.
    """
    if energy <= 0:
        raise DomainError("tuned positive-energy state needs E > 0")
    grid = RadialGrid(grid_points, r0)
    radius = support * r0
    if radius >= r0 - 4 * grid.h:
        raise DomainError("support must end at least four cells inside r0")
    local = local or LocalPotential.zero(r0)
    carrier = PartialWaveProblem(m, local, None, 1.0, r0, grid)
    radii = grid.full_nodes
    scaled = radii / radius
    profile = np.where(scaled < 1.0, scaled ** m * (1.0 - scaled ** 2) ** 2, 0.0)

    residual = apply_stencil(carrier, energy, profile)
    strength = float(residual @ profile)
    if strength == 0.0:
        raise DomainError("profile is annihilated by the local operator")
    factor = np.divide(residual, grid.volumes, out=np.zeros_like(residual), where=grid.volumes > 0)
    shape = LocalPotential.tabulated(radii, factor, r0)
    return SymmetricKernel(terms=(SeparableTerm(1.0 / strength, shape),))


def lambda_loop(problem: PartialWaveProblem, k: float, points: Optional[int] = None,
                threads: int = 1) -> PhaseShiftCurve:
    """Continuation 0 -> 1 -> 0; the phase returns to zero"""
    points = points or Config.LAMBDA_POINTS
    up = np.linspace(0.0, 1.0, points)
    return phase_along_path(problem, k, np.concatenate([up, up[-2::-1]]), threads=threads)
