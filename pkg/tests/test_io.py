import json

import numpy as np
import pandas as pd
import pytest

from models import ProblemSyntaxError, ValidationError
from processors.potentials import RadialGrid, load_problem
from utils.io import (parse_header, read_matrix_file, read_wavefunction_file, write_csv, write_json,
                      write_matrix_file, write_wavefunction_file)


def test_header():
    assert parse_header('# n=12 r0=1.5') == (12, 1.5)
    with pytest.raises(ProblemSyntaxError):
        parse_header('n=12')


def test_matrix_file(tmp_path):
    matrix = np.arange(16.0).reshape(4, 4) / 7.0
    path = write_matrix_file(tmp_path / 'kernel.dat', matrix, 2.0)
    loaded, r0 = read_matrix_file(path)
    assert r0 == 2.0
    assert np.array_equal(loaded, matrix)


def test_wavefunction_file_shape_is_checked(tmp_path):
    path = tmp_path / 'u.dat'
    path.write_text('# n=3 r0=1.0\n0.1 1.0\n0.2 2.0\n')
    with pytest.raises(ProblemSyntaxError):
        read_wavefunction_file(path)


def test_problem_with_tabulated_kernel(tmp_path):
    grid = RadialGrid(16, 1.0)
    g = np.exp(-grid.nodes)
    write_matrix_file(tmp_path / 'kernel.dat', -2.0 * np.outer(g, g), 1.0)
    (tmp_path / 'problem.json').write_text(json.dumps({
        'm': 1, 'r0': 1.0, 'grid_points': 16,
        'local': {'type': 'zero'},
        'nonlocal': {'type': 'matrix', 'file': 'kernel.dat'},
    }))
    problem = load_problem(tmp_path / 'problem.json')
    assert problem.name == 'problem'
    assert problem.nonlocal_op.source == 'kernel.dat'
    assert problem.nonlocal_op.matrix.shape == (16, 16)


def test_saito_wavefunction_file_must_match_the_grid(tmp_path):
    grid = RadialGrid(16, 1.0)
    write_wavefunction_file(tmp_path / 'u.dat', grid.nodes * 1.01, np.ones(16), 1.0)
    (tmp_path / 'problem.json').write_text(json.dumps({
        'm': 0, 'r0': 1.0, 'grid_points': 16,
        'local': {'type': 'zero'},
        'nonlocal': {'type': 'saito', 'file': 'u.dat'},
    }))
    with pytest.raises(ValidationError) as excinfo:
        load_problem(tmp_path / 'problem.json')
    assert excinfo.value.field == 'nonlocal.file'


def test_csv_and_json_are_deterministic(tmp_path):
    frame = pd.DataFrame({'k': [0.1, 1.0 / 3.0], 'eta': [np.float64(2.0), np.pi]})
    first = write_csv(frame, tmp_path / 'a.csv').read_bytes()
    second = write_csv(frame, tmp_path / 'b.csv').read_bytes()
    assert first == second
    assert first.decode().splitlines()[2].startswith('0.33333333333333331')
    path = write_json({'value': np.float64(0.5), 'count': np.int64(3), 'array': np.arange(2)}, tmp_path / 'r.json')
    assert json.loads(path.read_text()) == {'value': 0.5, 'count': 3, 'array': [0, 1]}
