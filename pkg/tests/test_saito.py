from dataclasses import replace

import numpy as np
import pytest

from models import DomainError, NoBoundStateError
from processors.potentials import LocalPotential, SaitoProjector, make_problem, saito_norm_squared, with_grid
from processors.radial import apply_stencil, first_row, reference_operator_row
from processors.saito import (SaitoProblem, build_saito, check_orthogonality, operator_range_defect,
                              redundant_state_check, saito_rank_ratio, zero_energy_residual)
from processors.spectrum import run_levinson
from tests import oracles
from tests.conftest import bundled

V0 = 40.0


@pytest.fixture(scope='module')
def saito_problem():
    return build_saito(bundled('saito_well'))


def test_binding_energy_matches_the_well(saito_problem):
    exact = oracles.bound_energies(0, V0, 1.0)
    assert len(exact) == 2
    assert -saito_problem.binding_energy == pytest.approx(exact[0], rel=1e-3)
    assert saito_problem.source_energy == pytest.approx(exact[0], rel=1e-3)
    assert saito_problem.base.r0 > 1.0 + 5.0
    assert saito_problem.base.grid.h == pytest.approx(bundled('saito_well').grid.h)


def test_wavefunction_is_normalized_and_decays(saito_problem):
    grid = saito_problem.base.grid
    assert saito_norm_squared(saito_problem.projector, grid, 0) == pytest.approx(1.0, abs=1e-10)
    assert abs(saito_problem.u[-1]) < 1e-12 * np.max(np.abs(saito_problem.u))


def test_wavefunction_matches_closed_form():
    problem = with_grid(bundled('saito_well'), 800)
    sp = build_saito(problem)
    energy = oracles.bound_energies(0, V0, 1.0)[0]
    exact = oracles.bound_wavefunction(0, V0, 1.0, energy)
    grid = sp.base.grid
    difference = sp.u - exact(grid.nodes)
    assert np.sqrt(np.sum(grid.weights * difference ** 2)) < 1e-3


def test_redundant_state_at_zero_energy(saito_problem):
    status = redundant_state_check(saito_problem)
    assert status.residual < 1e-6
    assert status.zero_energy_degenerate
    assert status.passed


def test_solutions_are_orthogonal_to_the_redundant_state(saito_problem):
    report = check_orthogonality(saito_problem)
    assert len(report.overlaps) == 10
    assert report.passed, report.max_violation


def test_orthogonality_is_thread_independent(saito_problem):
    energies = [1.0, 4.0, 9.0]
    serial = check_orthogonality(saito_problem, energies, threads=1)
    threaded = check_orthogonality(saito_problem, energies, threads=3)
    assert serial.overlaps == threaded.overlaps


def test_operator_has_rank_one(saito_problem):
    assert saito_rank_ratio(saito_problem) < 1e-10
    assert operator_range_defect(saito_problem) < 1e-12


def test_perturbed_state_is_not_redundant(saito_problem):
    base = saito_problem.base
    rng = np.random.default_rng(7)
    u = saito_problem.u * (1.0 + 0.01 * rng.standard_normal(saito_problem.u.size))
    local_ref = saito_problem.projector.local_ref
    u /= np.sqrt(saito_norm_squared(SaitoProjector(u, local_ref, 0), base.grid, 0))
    perturbed = SaitoProblem(replace(base, nonlocal_op=SaitoProjector(u, local_ref, 0)), saito_problem.binding_energy,
                             saito_problem.source_energy, saito_problem.source_r0)
    status = redundant_state_check(perturbed)
    assert status.residual > 1e-4
    assert not status.passed
    assert status.to_dict()['status'] == 'FAIL'


def test_reference_operator_returns_the_binding_energy(saito_problem):
    base = saito_problem.base
    grid = base.grid
    reduced = saito_problem.reduced
    rows = np.arange(first_row(base.m), grid.n_points)
    applied = apply_stencil(base, 0.0, reduced)[rows]
    expected = saito_problem.binding_energy * grid.volumes[rows] * reduced[rows]
    assert np.linalg.norm(applied - expected) < 1e-9 * np.linalg.norm(expected)
    bracket = reference_operator_row(base, saito_problem.projector) @ reduced
    assert bracket == pytest.approx(saito_problem.binding_energy, rel=1e-9)
    assert zero_energy_residual(saito_problem) < 1e-9


def test_rebuild_at_a_second_depth():
    depth = 60.0
    problem = make_problem(0, LocalPotential.square_well(depth, 1.0), 1.0, grid_points=200, name='deeper')
    sp = build_saito(problem)
    exact = oracles.bound_energies(0, depth, 1.0)
    assert -sp.binding_energy == pytest.approx(exact[0], rel=1e-3)
    assert sp.binding_energy > build_saito(bundled('saito_well')).binding_energy
    assert redundant_state_check(sp).passed
    assert check_orthogonality(sp, [1.0, 5.0]).passed


def test_excited_state_is_also_redundant():
    sp = build_saito(bundled('saito_well'), level=1)
    assert sp.level == 1
    assert sp.binding_energy < build_saito(bundled('saito_well')).binding_energy
    assert redundant_state_check(sp).passed
    assert check_orthogonality(sp, [2.0, 6.0]).passed


def test_construction_requirements():
    with pytest.raises(DomainError):
        build_saito(bundled('separable_m0'))
    with pytest.raises(NoBoundStateError):
        build_saito(bundled('barrier_m0'))
    with pytest.raises(NoBoundStateError):
        build_saito(bundled('saito_well'), level=2)
    with pytest.raises(DomainError):
        check_orthogonality(build_saito(bundled('saito_well')), [0.0, 1.0])


def test_report_lists_the_state_without_a_levinson_assertion(saito_problem):
    report, _ = run_levinson(saito_problem.base)
    assert 'levinson' not in report.checks
    assert 'crossing_count' not in report.checks
