"""
Bound states at E <= 0, the zero-energy crossing ledger and the Levinson report.

Matching is done on the Prüfer difference D(E) = theta_int(E) - theta_ext(E),
with theta_int lifted continuously from the deepest scan energy. D starts in
(0, pi) below the spectrum and decreases with E, so every level j*pi passed on
the way to E = 0 is one bound state.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from config import Config
from models import (CheckStatus, CrossingDirection, CrossingEvent, CrossingLedger, DimensionError, DomainError,
                    HalfBound, JumpConvention, LevinsonError, RefinementLimitError, ScanResolutionError,
                    SingularSystemError, SpectrumReport)
from processors.potentials import PartialWaveProblem, SaitoProjector, max_effective_strength, with_depth, with_grid
from processors.radial import exterior_log_derivative, interior_prufer, zero_energy_limit
from processors.scattering import (default_positive_energies, detect_positive_energy_bound, eta_zero_detail,
                                   track_prufer, wrap_half)

logger = logging.getLogger(__name__)


@dataclass
class MatchingScan:
    """Prüfer angles on the scan samples, ordered from the deepest energy up to E = 0"""
    m: int
    kappas: np.ndarray
    theta_interior: np.ndarray
    theta_exterior: np.ndarray
    critical: bool = False
    zero_singular: bool = False

    @property
    def energies(self) -> np.ndarray:
        return -self.kappas ** 2

    @property
    def delta(self) -> np.ndarray:
        return self.theta_interior - self.theta_exterior

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'energy': self.energies,
            'kappa': self.kappas,
            'theta_interior': self.theta_interior,
            'theta_exterior': self.theta_exterior,
            'delta_theta': self.delta,
        })


def exterior_angle(m: int, energy: float, r0: float) -> float:
    return exterior_log_derivative(m, energy, r0).prufer


def _critical_tolerance(r0: float, tolerance: Optional[float]) -> float:
    return (Config.CRITICAL_TOLERANCE if tolerance is None else tolerance) / r0


def _touches_rho(theta: float, m: int, r0: float, tolerance: Optional[float] = None) -> bool:
    """A(0) = tan(theta) equals rho_m within the critical tolerance"""
    return abs(np.tan(theta) - zero_energy_limit(m, r0)) < _critical_tolerance(r0, tolerance)


def scan_matching(problem: PartialWaveProblem, threads: int = 1,
                  critical_tolerance: Optional[float] = None) -> MatchingScan:
    """Lifted matching angles from E_min = -(10 S + 100 / r0²) up to E = 0"""
    m = problem.m
    r0 = problem.r0
    kappa_max = np.sqrt(10.0 * max_effective_strength(problem) + 100.0 / r0 ** 2)
    kappas = np.concatenate([np.geomspace(kappa_max, Config.SCAN_KAPPA_MIN / r0, Config.SCAN_POINTS), [0.0]])

    zero_singular = False
    try:
        interior_prufer(problem, 0.0)
    except SingularSystemError as e:
        # a zero-energy solution that the seeded system cannot represent
        zero_singular = True
        kappas[-1] = kappas[-2] * 1e-3
        logger.info(f"Zero-energy system is singular (measure {e.measure:.3e}); scan stops at kappa={kappas[-1]:.3e}")

    def evaluate(kappa: float) -> float:
        return interior_prufer(problem, -kappa * kappa)

    try:
        kappas, lifted = track_prufer(evaluate, kappas, Config.MAX_THETA_STEP, threads=threads,
                                      max_refinements=Config.SCAN_HALVINGS)
    except RefinementLimitError as e:
        raise ScanResolutionError(f"matching scan for m={m}: {e}")
    exterior = np.array([exterior_angle(m, -kappa * kappa, r0) for kappa in kappas])

    start = lifted[0] - exterior[0]
    offset = np.mod(start, np.pi)
    if offset == 0.0:
        offset = np.pi
    lifted = lifted + (offset - start)

    critical = False
    if not zero_singular and _touches_rho(lifted[-1], m, r0, critical_tolerance):
        critical = True
        end = lifted[-1] - exterior[-1]
        lifted[-1] = exterior[-1] + np.pi * np.round(end / np.pi)
    logger.debug(f"Matching scan for m={m}: {kappas.size} samples, D from {lifted[0] - exterior[0]:.6f} "
                 f"to {lifted[-1] - exterior[-1]:.6f}")
    return MatchingScan(m, kappas, lifted, exterior, critical=critical, zero_singular=zero_singular)


def _lifted_difference(problem: PartialWaveProblem, base: float, level: float) -> Callable[[float], float]:
    m = problem.m
    r0 = problem.r0

    def difference(energy: float) -> float:
        theta = base + wrap_half(interior_prufer(problem, energy) - base)
        return theta - exterior_angle(m, energy, r0) - level
    return difference


def _refine_root(problem: PartialWaveProblem, scan: MatchingScan, index: int, level: float) -> float:
    base = scan.theta_interior[index]
    difference = _lifted_difference(problem, base, level)
    lo_kappa = scan.kappas[index]
    hi_kappa = scan.kappas[index + 1]
    if hi_kappa > 0.0:
        lo, hi = -lo_kappa ** 2, -hi_kappa ** 2
        return float(brentq(difference, lo, hi, xtol=Config.ENERGY_TOLERANCE * max(1.0, abs(hi))))

    # last interval: shallow states sit exponentially close to threshold
    floor = np.log(Config.SHALLOW_KAPPA_FLOOR / problem.r0)
    top = np.log(lo_kappa)

    def in_log_kappa(t: float) -> float:
        return difference(-np.exp(2.0 * t))

    if in_log_kappa(floor) > 0.0:
        # the level is crossed, so the state counts; its energy is only bounded
        logger.warning(f"Bound state for m={problem.m} is shallower than kappa={np.exp(floor):.1e}; "
                       f"reported at the floor")
        return float(-np.exp(2.0 * floor))
    t = brentq(in_log_kappa, floor, top, xtol=0.5 * Config.ENERGY_TOLERANCE)
    return float(-np.exp(2.0 * t))


def _extrapolated(problem: PartialWaveProblem, energies: List[float], threads: int,
                  critical_tolerance: Optional[float]) -> List[float]:
    """Richardson step (4 E_h - E_2h) / 3 against the half-resolution grid.

    Left as computed when the grid is tied to tabulated data, too coarse to
    halve, or when the two grids disagree on the count.
    """
    n_points = problem.grid.n_points
    if n_points % 2 or n_points // 2 < Config.MIN_GRID_POINTS:
        return energies
    try:
        coarse_problem = with_grid(problem, n_points // 2)
    except DimensionError:
        return energies
    fine = [energy for energy in energies if energy < 0.0]
    coarse = [energy for energy in scan_bound_states(coarse_problem, threads, critical_tolerance,
                                                     extrapolate=False)[0] if energy < 0.0]
    if len(coarse) != len(fine):
        logger.info(f"Grids N={n_points} and N={n_points // 2} disagree on the bound-state count "
                    f"({len(fine)} vs {len(coarse)}); energies are not extrapolated")
        return energies
    improved = [energy for energy in energies if energy >= 0.0]
    for value, rough in zip(fine, coarse):
        step = (4.0 * value - rough) / 3.0
        improved.append(step if step < 0.0 else value)
    return sorted(improved)


def scan_bound_states(problem: PartialWaveProblem, threads: int = 1, critical_tolerance: Optional[float] = None,
                      extrapolate: bool = True) -> Tuple[List[float], MatchingScan]:
    """Bound energies (E = 0 included for a critical m >= 2 problem) and the scan behind them.

    With ``extrapolate`` the leading h² error of the negative energies is
    removed by a Richardson step; the count always comes from the scan itself.
    """
    scan = scan_matching(problem, threads, critical_tolerance)
    delta = scan.delta
    energies: List[float] = []
    top = int(np.ceil(delta[0] / np.pi)) - 1
    # a snapped critical endpoint sits on its level, not below it
    end = delta[-1] / np.pi
    bottom = (int(np.round(end)) if scan.critical else int(np.floor(end))) + 1
    for j in range(top, bottom - 1, -1):
        level = j * np.pi
        crossings = np.nonzero((delta[:-1] > level) & (delta[1:] <= level))[0]
        rises = np.nonzero((delta[:-1] <= level) & (delta[1:] > level))[0]
        if rises.size:
            logger.warning(f"Matching angle rises through {j} pi for m={problem.m}; the scan is not monotone")
        for index in crossings:
            energies.append(_refine_root(problem, scan, int(index), level))
    if scan.critical and problem.m >= 2:
        energies.append(0.0)
    energies.sort()
    if extrapolate:
        energies = _extrapolated(problem, energies, threads, critical_tolerance)
    logger.info(f"Found {len(energies)} bound state(s) for m={problem.m}: {energies}")
    return energies, scan


def find_bound_states(problem: PartialWaveProblem, threads: int = 1, extrapolate: bool = True) -> List[float]:
    return scan_bound_states(problem, threads, extrapolate=extrapolate)[0]


def classify_critical(problem: PartialWaveProblem, tolerance: Optional[float] = None) -> HalfBound:
    """Zero-energy classification from A_m(0) against rho_m"""
    try:
        theta = interior_prufer(problem, 0.0)
    except SingularSystemError:
        logger.info("Zero-energy system is singular; no threshold classification")
        return HalfBound.NONE
    if not _touches_rho(theta, problem.m, problem.r0, tolerance):
        return HalfBound.NONE
    if problem.m >= 2:
        return HalfBound.BOUND_AT_ZERO
    return HalfBound.M1_HALF if problem.m == 1 else HalfBound.M0_HALF


def tune_critical_depth(problem: PartialWaveProblem, lo: float = 0.5, hi: float = 1.5,
                        samples: int = 41) -> PartialWaveProblem:
    """Depth multiplier nearest to the current one at which A_m(0) = rho_m on the grid"""
    target = np.arctan(zero_energy_limit(problem.m, problem.r0))

    def offset(depth: float) -> float:
        return float(wrap_half(interior_prufer(with_depth(problem, depth), 0.0) - target))

    depths = np.linspace(lo * problem.depth, hi * problem.depth, samples)
    values = np.array([offset(depth) for depth in depths])
    # sign changes away from the wrap at +-pi/2
    candidates = [i for i in range(samples - 1)
                  if values[i] * values[i + 1] <= 0 and abs(values[i]) < np.pi / 4 and abs(values[i + 1]) < np.pi / 4]
    if not candidates:
        raise DomainError(f"no critical depth between {depths[0]!r} and {depths[-1]!r}")
    index = min(candidates, key=lambda i: abs(depths[i] - problem.depth))
    depth = brentq(offset, depths[index], depths[index + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
    logger.info(f"Critical depth multiplier for m={problem.m}: {depth!r}")
    return replace(with_depth(problem, depth), tune_critical=False)


def _build_ledger(evaluate: Callable[[float], float], axis_values: np.ndarray, axis_name: str, m: int, r0: float,
                  threads: int, critical_tolerance: Optional[float]) -> CrossingLedger:
    theta_rho = np.arctan(zero_energy_limit(m, r0))

    def near_event(theta: float) -> bool:
        return abs(wrap_half(theta - theta_rho)) < 2.0 * Config.EVENT_THETA_STEP

    values, thetas = track_prufer(evaluate, axis_values, Config.MAX_THETA_STEP, fine_step=Config.EVENT_THETA_STEP,
                                  near_event=near_event, threads=threads)
    positions = (thetas - theta_rho) / np.pi
    levels = np.floor(positions).astype(int)
    for index in (0, -1):
        if _touches_rho(thetas[index], m, r0, critical_tolerance):
            # a zero-energy state counts as bound only for m >= 2
            levels[index] = int(np.round(positions[index])) - (1 if m >= 2 else 0)

    events: List[CrossingEvent] = []
    for i in range(values.size - 1):
        a, b = levels[i], levels[i + 1]
        if a == b:
            continue
        if b < a:
            crossed, direction = range(a, b, -1), CrossingDirection.DOWN
        else:
            crossed, direction = range(a + 1, b + 1), CrossingDirection.UP
        span = thetas[i + 1] - thetas[i]
        for level in crossed:
            target = theta_rho + level * np.pi
            fraction = 0.5 if span == 0.0 else float(np.clip((target - thetas[i]) / span, 0.0, 1.0))
            events.append(CrossingEvent(float(values[i] + fraction * (values[i + 1] - values[i])), direction))
    net = int(levels[0] - levels[-1])
    logger.info(f"Crossing ledger over {axis_name} for m={m}: {len(events)} event(s), net {net}")
    return CrossingLedger(m, values, thetas, events, net, axis_name=axis_name)


def sweep_lambda(problem: PartialWaveProblem, m: Optional[int] = None, points: Optional[int] = None,
                 threads: int = 1, critical_tolerance: Optional[float] = None) -> CrossingLedger:
    """Zero-energy crossings of A_m(0, lambda) through rho_m for lambda from 0 to 1"""
    if m is not None and m != problem.m:
        problem = replace(problem, m=m)
    axis = np.linspace(0.0, 1.0, points or Config.LAMBDA_POINTS)

    def evaluate(lam: float) -> float:
        return interior_prufer(replace(problem, lam=problem.lam * lam), 0.0)

    return _build_ledger(evaluate, axis, 'lambda', problem.m, problem.r0, threads, critical_tolerance)


def sweep_depth(problem: PartialWaveProblem, start: float = 1.0, stop: float = -1.0, points: Optional[int] = None,
                threads: int = 1, critical_tolerance: Optional[float] = None) -> CrossingLedger:
    """Same ledger along the local depth multiplier, kernel strength fixed"""
    axis = np.linspace(start, stop, points or Config.LAMBDA_POINTS)

    def evaluate(depth: float) -> float:
        return interior_prufer(with_depth(problem, depth), 0.0)

    return _build_ledger(evaluate, axis, 'depth', problem.m, problem.r0, threads, critical_tolerance)


def chain_ledgers(first: CrossingLedger, second: CrossingLedger) -> CrossingLedger:
    """Ledger of two sweeps run back to back; the second starts where the first ends"""
    if first.m != second.m:
        raise DomainError(f"cannot chain ledgers for m={first.m} and m={second.m}")
    shift = np.pi * np.round((first.prufer[-1] - second.prufer[0]) / np.pi)
    name = first.axis_name if first.axis_name == second.axis_name else f"{first.axis_name}+{second.axis_name}"
    return CrossingLedger(
        first.m,
        np.concatenate([first.lambdas, second.lambdas[1:]]),
        np.concatenate([first.prufer, second.prufer[1:] + shift]),
        list(first.events) + list(second.events),
        first.net_count + second.net_count,
        axis_name=name,
    )


def _guarded(func: Callable[[], Any]) -> Tuple[Any, Optional[str]]:
    try:
        return func(), None
    except LevinsonError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return None, f"{type(e).__name__}: {e}"


def run_levinson(problem: PartialWaveProblem, threads: int = 1, positive_energies: Optional[np.ndarray] = None,
                 levinson_tolerance: Optional[float] = None,
                 critical_tolerance: Optional[float] = None) -> Tuple[SpectrumReport, Dict[str, pd.DataFrame]]:
    """Levinson report for one partial wave plus the matching and ledger traces"""
    levinson_tolerance = Config.LEVINSON_TOLERANCE if levinson_tolerance is None else levinson_tolerance
    m = problem.m
    logging.info(f"Verifying Levinson's theorem for '{problem.name}' (m={m}, N={problem.grid.n_points})")

    def positive() -> list:
        energies = positive_energies if positive_energies is not None else default_positive_energies(problem)
        return detect_positive_energy_bound(problem, energies, threads)

    components = {
        'bound': lambda: scan_bound_states(problem, threads, critical_tolerance),
        'critical': lambda: classify_critical(problem, critical_tolerance),
        'positive': positive,
        'eta_zero': lambda: eta_zero_detail(problem, JumpConvention.CONTINUOUS, threads=threads),
        'ledger': lambda: sweep_lambda(problem, threads=threads, critical_tolerance=critical_tolerance),
    }
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(components))) as pool:
            futures = {name: pool.submit(_guarded, func) for name, func in components.items()}
            results = {name: future.result() for name, future in futures.items()}
    else:
        results = {name: _guarded(func) for name, func in components.items()}

    checks: Dict[str, CheckStatus] = {}
    errors: Dict[str, str] = {}

    def failed(check: str, *names: str) -> bool:
        messages = [results[name][1] for name in names if results[name][1] is not None]
        if messages:
            checks[check] = CheckStatus.ERROR
            errors[check] = '; '.join(messages)
        return bool(messages)

    bound, _ = results['bound']
    energies = bound[0] if bound is not None else []
    half_bound = results['critical'][0] or HalfBound.NONE
    records = results['positive'][0] or []
    ledger = results['ledger'][0]
    n_m = len(energies)

    eta0 = None
    raw = None
    k_used = None
    eta_detail = results['eta_zero'][0]
    if eta_detail is not None:
        eta0, raw, k_used = eta_detail
        logging.info(f"eta({k_used:.1e}) = {raw:.6f}, rounded to {eta0 / np.pi:.0f} pi")

    residual = None
    is_saito = isinstance(problem.nonlocal_op, SaitoProjector)
    if is_saito:
        logging.info("Saito problem: the redundant zero-energy state is listed separately, no Levinson assertion")
    elif not failed('levinson', 'bound', 'critical', 'eta_zero'):
        expected = n_m + (1 if half_bound is HalfBound.M1_HALF else 0)
        residual = eta0 - expected * np.pi
        passed = abs(residual) < levinson_tolerance * np.pi
        checks['levinson'] = CheckStatus.PASS if passed else CheckStatus.FAIL
    if not is_saito and not failed('crossing_count', 'bound', 'ledger'):
        checks['crossing_count'] = CheckStatus.PASS if ledger.net_count == n_m else CheckStatus.FAIL
    if not failed('convention_invariance', 'eta_zero', 'positive'):
        if records:
            # the jump-by-pi value is evaluated on its own, with the detected records
            results['eta_zero_jump'] = _guarded(
                lambda: eta_zero_detail(problem, JumpConvention.JUMP_BY_PI, records, threads))
        else:
            results['eta_zero_jump'] = (eta_detail, None)
        if not failed('convention_invariance', 'eta_zero_jump'):
            invariant = abs(results['eta_zero_jump'][0][0] - eta0) <= 1e-9
            checks['convention_invariance'] = CheckStatus.PASS if invariant else CheckStatus.FAIL

    report = SpectrumReport(
        m=m,
        bound_energies=energies,
        n_m=n_m,
        half_bound=half_bound,
        sigma=len(records),
        eta0=eta0,
        levinson_residual=residual,
        net_count=ledger.net_count if ledger is not None else None,
        checks=checks,
        errors=errors,
        positive_bound_states=records,
        eta_k_eval=raw,
        k_eval=k_used,
    )
    for name, status in checks.items():
        if status is not CheckStatus.PASS:
            logging.warning(f"Check '{name}' for m={m}: {status.value} {errors.get(name, '')}".rstrip())

    traces: Dict[str, pd.DataFrame] = {}
    if bound is not None:
        traces['matching'] = bound[1].to_frame()
    if ledger is not None:
        traces['ledger'] = ledger.to_frame()
    return report, traces


def verify_levinson(problem: PartialWaveProblem, threads: int = 1, **tolerances) -> SpectrumReport:
    return run_levinson(problem, threads, **tolerances)[0]
