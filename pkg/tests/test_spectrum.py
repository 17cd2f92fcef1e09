import numpy as np
import pytest

from models import CheckStatus, CrossingDirection, DomainError, HalfBound
from processors.potentials import LocalPotential, ShapeKind, make_problem, scale, with_depth
from processors.spectrum import (chain_ledgers, classify_critical, find_bound_states, run_levinson,
                                 scan_bound_states, scan_matching, sweep_depth, sweep_lambda, tune_critical_depth,
                                 verify_levinson)
from tests import oracles
from tests.conftest import bundled, square_well

WELLS = {
    'well_m0_n1': (0, 6.25, 1),
    'well_n2': (0, 30.25, 2),
    'well_m0_n3': (0, 72.25, 3),
    'well_m1_n0': (1, 4.0, 0),
    'well_m1_n1': (1, 16.0, 1),
    'well_m1_n2': (1, 49.0, 2),
    'well_m2_n1': (2, 25.0, 1),
    'well_m3_n1': (3, 36.0, 1),
}

LOCAL_SUITE = list(WELLS) + ['barrier_m0', 'gaussian_m0', 'composite_m1', 'free']
SEPARABLE_SUITE = ['separable_m0', 'separable_m0_repulsive', 'separable_m1', 'separable_m1_well',
                   'separable_m2_gaussian', 'separable_m0_two_terms']


@pytest.mark.parametrize('name', list(WELLS))
def test_bound_states_match_bessel_matching(name):
    m, v0, expected = WELLS[name]
    exact = oracles.bound_energies(m, v0, 1.0)
    assert len(exact) == expected
    energies = find_bound_states(bundled(name))
    assert len(energies) == expected
    assert np.allclose(energies, exact, rtol=1e-6)


def test_weak_m0_well_always_binds():
    energies = find_bound_states(square_well(0, 1.0))
    exact = oracles.bound_energies(0, 1.0, 1.0)
    assert len(energies) == len(exact) == 1
    assert energies[0] == pytest.approx(exact[0], rel=1e-3)
    assert find_bound_states(square_well(1, 1.0)) == []


@pytest.mark.parametrize('shape', [
    LocalPotential.square_well(1.0, 1.0),
    LocalPotential.gaussian(-1.0, 0.0, 0.4, 1.0),
    LocalPotential(ShapeKind.POWER, 1.0, amplitude=-1.0, exponent=1.0),
])
def test_m0_binds_at_small_coupling(shape):
    problem = scale(make_problem(0, shape, 1.0, grid_points=800), 1e-3)
    energies = find_bound_states(problem)
    assert len(energies) >= 1
    assert all(energy < 0.0 for energy in energies)


def test_state_below_the_kappa_floor_is_counted():
    report = verify_levinson(scale(square_well(0, 1.0), 2e-3))
    assert report.n_m == 1
    assert report.net_count == 1
    assert report.checks['crossing_count'] is CheckStatus.PASS
    assert report.bound_energies[0] < 0.0


def test_extrapolation_improves_on_the_raw_grid():
    exact = np.array(oracles.bound_energies(1, 49.0, 1.0))
    raw = np.array(find_bound_states(bundled('well_m1_n2'), extrapolate=False))
    improved = np.array(find_bound_states(bundled('well_m1_n2')))
    assert np.all(np.abs(improved - exact) < np.abs(raw - exact))
    assert np.allclose(improved, exact, rtol=1e-6)


def test_matching_difference_decreases_with_energy():
    scan = scan_matching(bundled('well_m0_n3'))
    assert np.all(np.diff(scan.delta) <= 1e-9)
    assert 0.0 < scan.delta[0] <= np.pi
    assert scan.kappas[-1] == 0.0
    assert list(scan.to_frame().columns) == ['energy', 'kappa', 'theta_interior', 'theta_exterior', 'delta_theta']


@pytest.mark.parametrize('name', LOCAL_SUITE + SEPARABLE_SUITE)
def test_levinson_identity(name):
    problem = bundled(name)
    report = verify_levinson(problem)
    assert report.checks['levinson'] is CheckStatus.PASS, report.errors
    assert report.checks['crossing_count'] is CheckStatus.PASS, report.errors
    assert report.net_count == report.n_m
    assert report.passed


def test_report_traces():
    report, traces = run_levinson(bundled('well_m1_n2'))
    assert report.n_m == 2
    assert report.eta0 == pytest.approx(2 * np.pi)
    assert 0.0 < report.k_eval <= 1e-3
    assert abs(report.eta_k_eval - report.eta0) < 0.3
    assert report.to_dict()['eta_k_eval'] == report.eta_k_eval
    assert set(traces) == {'matching', 'ledger'}
    assert report.to_dict()['status'] == 'PASS'


def test_attractive_sweep_only_moves_levels_down():
    ledger = sweep_lambda(bundled('well_n2'))
    assert ledger.net_count == 2
    assert [event.direction for event in ledger.events] == [CrossingDirection.DOWN] * 2
    assert np.all(np.diff([event.lam for event in ledger.events]) > 0)


def test_depth_sweep_releases_the_bound_state():
    problem = bundled('composite_m1')
    up = sweep_lambda(problem)
    down = sweep_depth(problem, 1.0, -1.0)
    chained = chain_ledgers(up, down)
    assert up.net_count == 1
    assert down.net_count == -1
    assert chained.net_count == 0
    assert chained.axis_name == 'lambda+depth'
    assert [event.direction for event in chained.events] == [CrossingDirection.DOWN, CrossingDirection.UP]
    assert find_bound_states(with_depth(problem, -1.0)) == []


def test_chain_requires_one_partial_wave():
    with pytest.raises(DomainError):
        chain_ledgers(sweep_lambda(bundled('well_m1_n1'), points=9), sweep_lambda(bundled('well_m2_n1'), points=9))


@pytest.mark.parametrize('m, root_bracket', [(0, (3.0, 4.5)), (1, (2.0, 3.0)), (2, (3.0, 4.5))])
def test_analytic_critical_depths(m, root_bracket):
    x = oracles.critical_root(m, *root_bracket)
    document_depth = {0: 14.681970642123893, 1: 5.783185962946784, 2: 14.681970642123893}[m]
    assert x ** 2 == pytest.approx(document_depth, rel=1e-12)


@pytest.fixture(scope='module')
def critical_reports():
    reports = {}
    for m in (0, 1, 2):
        problem = tune_critical_depth(bundled(f'critical_m{m}'))
        assert problem.depth == pytest.approx(1.0, abs=1e-3)
        reports[m] = run_levinson(problem)[0]
    return reports


def test_critical_m2_gains_a_zero_energy_state(critical_reports):
    report = critical_reports[2]
    assert report.half_bound is HalfBound.BOUND_AT_ZERO
    # the first m = 2 state sits exactly at threshold
    assert report.bound_energies == [0.0]
    assert report.n_m == 1
    assert report.eta0 == pytest.approx(np.pi)
    assert report.passed


def test_critical_m1_gains_pi_without_a_state(critical_reports):
    report = critical_reports[1]
    assert report.half_bound is HalfBound.M1_HALF
    assert 0.0 not in report.bound_energies
    assert report.n_m == 0
    assert report.eta0 == pytest.approx(np.pi)
    assert report.passed


def test_critical_m0_gains_nothing(critical_reports):
    report = critical_reports[0]
    assert report.half_bound is HalfBound.M0_HALF
    assert report.n_m == 1
    assert report.eta0 == pytest.approx(np.pi)
    assert report.passed


def test_classification_away_from_threshold():
    assert classify_critical(bundled('well_m1_n1')) is HalfBound.NONE
    assert classify_critical(bundled('free')) is HalfBound.M0_HALF
    assert classify_critical(make_problem(2, LocalPotential.zero(1.0), 1.0, grid_points=400)) is HalfBound.NONE


def test_tuning_fails_without_a_threshold_in_range():
    with pytest.raises(DomainError):
        tune_critical_depth(bundled('well_m1_n1'), lo=0.9, hi=1.1, samples=5)


def test_scan_is_thread_independent():
    problem = bundled('separable_m1_well')
    serial, _ = scan_bound_states(problem, threads=1)
    threaded, _ = scan_bound_states(problem, threads=4)
    assert serial == threaded
