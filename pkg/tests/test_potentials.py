import json

import numpy as np
import pytest

from models import DimensionError, DomainError, ProblemSyntaxError, ValidationError
from processors.potentials import (LocalPotential, PartialWaveProblem, RadialGrid, SaitoProjector, SeparableTerm,
                                   ShapeKind, SymmetricKernel, combine_kernels, max_effective_strength,
                                   parse_problem, scale, serialize_problem, with_grid)
from tests.conftest import bundled


def document(**overrides):
    base = {'m': 0, 'r0': 1.0, 'grid_points': 32, 'local': {'type': 'piecewise', 'segments': [[0.0, 1.0, -4.0]]}}
    base.update(overrides)
    return json.dumps(base)


def test_segments_are_half_open():
    shape = LocalPotential(ShapeKind.PIECEWISE, 1.0, segments=((0.0, 0.5, -2.0), (0.5, 1.0, 3.0)))
    values = shape(np.array([0.0, 0.49, 0.5, 0.99, 1.0, 2.0]))
    assert list(values) == [-2.0, -2.0, 3.0, 3.0, 0.0, 0.0]


def test_shapes_vanish_beyond_cutoff():
    gaussian = LocalPotential.gaussian(-5.0, 0.2, 0.3, 0.8)
    assert gaussian(np.array([0.8, 0.9])).tolist() == [0.0, 0.0]
    assert gaussian(np.array([0.2]))[0] == -5.0
    table = LocalPotential.tabulated([0.0, 0.5, 1.0], [1.0, 2.0, 3.0], 1.0)
    assert np.isclose(table(np.array([0.25]))[0], 1.5)


def test_parse_bundled_documents():
    problem = bundled('separable_m1_well')
    assert problem.m == 1
    assert problem.name == 'separable_m1_well'
    assert isinstance(problem.nonlocal_op, SymmetricKernel)
    assert problem.nonlocal_op.is_separable
    assert bundled('critical_m2').tune_critical


def test_malformed_json_reports_position():
    with pytest.raises(ProblemSyntaxError) as excinfo:
        parse_problem('{\n  "m": 0,\n  "r0": \n}')
    assert excinfo.value.line == 4


@pytest.mark.parametrize('overrides, field_name', [
    ({'m': -1}, 'm'),
    ({'m': 1.5}, 'm'),
    ({'r0': 0.0}, 'r0'),
    ({'lambda': 1.5}, 'lambda'),
    ({'grid_points': 4}, 'grid_points'),
    ({'local': {'type': 'piecewise', 'segments': [[0.0, 0.6, -1.0], [0.5, 1.0, -1.0]]}}, 'local'),
    ({'local': {'type': 'piecewise', 'segments': [[0.0, 1.0, -1.0]], 'cutoff': 2.0}}, 'local'),
    ({'local': {'type': 'power', 'amplitude': 1.0, 'exponent': -3.0}}, 'local'),
    ({'local': {'type': 'gaussian', 'amplitude': 1.0, 'width': 0.0}}, 'local'),
    ({'local': {'type': 'bogus'}}, 'local'),
    ({'nonlocal': {'type': 'separable', 'terms': []}}, 'nonlocal.terms'),
    ({'nonlocal': {'type': 'unknown'}}, 'nonlocal.type'),
])
def test_invalid_documents_name_the_field(overrides, field_name):
    with pytest.raises(ValidationError) as excinfo:
        parse_problem(document(**overrides))
    assert excinfo.value.field == field_name


def test_missing_required_field():
    with pytest.raises(ValidationError) as excinfo:
        parse_problem(json.dumps({'m': 0, 'local': {'type': 'zero'}}))
    assert excinfo.value.field == 'r0'


def test_asymmetric_matrix_is_rejected():
    matrix = np.zeros((32, 32))
    matrix[0, 1] = 1.0
    with pytest.raises(ValidationError) as excinfo:
        parse_problem(document(**{'nonlocal': {'type': 'matrix', 'values': matrix.tolist()}}))
    assert 'symmetric' in excinfo.value.message


def test_serialized_problem_parses_to_the_same_document():
    problem = bundled('separable_m0_two_terms')
    text = serialize_problem(problem)
    assert serialize_problem(parse_problem(text)) == text


def test_scale_composes_and_checks_range():
    problem = bundled('well_m1_n1')
    assert scale(scale(problem, 0.5), 0.5).lam == 0.25
    assert scale(problem, 0.0).is_free
    with pytest.raises(DomainError):
        scale(problem, 1.5)


def test_with_grid_keeps_grid_bound_operators():
    problem = bundled('separable_m1')
    assert with_grid(problem, 64).grid.n_points == 64
    grid = RadialGrid(32, 1.0)
    u = np.zeros(32)
    u[3] = 1.0
    local = LocalPotential.zero(1.0)
    saito = PartialWaveProblem(0, local, SaitoProjector(u, local, 0), 1.0, 1.0, grid)
    with pytest.raises(DimensionError):
        with_grid(saito, 64)


def test_combine_separable_kernels():
    shape = LocalPotential.square_well(-1.0, 1.0)
    first = SymmetricKernel(terms=(SeparableTerm(2.0, shape),))
    second = SymmetricKernel(terms=(SeparableTerm(-1.0, shape),))
    combined = combine_kernels(first, 0.5, second, 3.0)
    assert [term.coefficient for term in combined.terms] == [1.0, -3.0]
    grid = RadialGrid(20, 1.0)
    g = shape(grid.nodes)
    assert np.allclose(combined.values(grid), -2.0 * np.outer(g, g))


def test_grid_volumes_integrate_r():
    grid = RadialGrid(100, 2.0)
    volumes = grid.volumes
    assert volumes[-1] == 0.0
    assert volumes[0] == grid.h ** 2 / 8.0
    # cells 0..N-1 cover [0, r0 - h/2]
    assert np.isclose(volumes.sum(), 0.5 * (2.0 - 0.5 * grid.h) ** 2)


def test_cell_average():
    grid = RadialGrid(50, 1.0)
    assert np.allclose(grid.cell_average(lambda r: np.full_like(r, 3.0)), 3.0)
    step = grid.cell_average(lambda r: np.where(r < 0.5, -1.0, 0.0))
    index = 25
    assert np.isclose(grid.full_nodes[index], 0.5)
    # r-weighted half of the cell lies below the step
    assert abs(step[index] + 0.5) < grid.h / grid.full_nodes[index]
    assert step[index - 1] == -1.0
    assert step[index + 1] == 0.0


def test_max_effective_strength():
    assert max_effective_strength(bundled('well_m2_n1')) == 25.0
    assert max_effective_strength(bundled('barrier_m0')) == 5.0
    assert max_effective_strength(bundled('separable_m0')) > 0.0
