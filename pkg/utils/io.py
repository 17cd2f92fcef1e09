"""
Plain-text kernel and wavefunction files, CSV traces and JSON reports.

Kernel and wavefunction files carry one header line ``# n=<N> r0=<r0>``
followed by whitespace-separated rows. Traces use 17 significant digits so
repeated runs are byte-identical.
"""
import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import pandas as pd

from models import ProblemSyntaxError

HEADER_PATTERN = re.compile(r'^#\s*n\s*=\s*(\d+)\s+r0\s*=\s*([0-9eE+\-.]+)\s*$')
FLOAT_FORMAT = '%.17g'

PathLike = Union[str, Path]


def parse_header(line: str) -> Tuple[int, float]:
    match = HEADER_PATTERN.match(line.strip())
    if not match:
        raise ProblemSyntaxError("expected header '# n=<N> r0=<r0>'", 1, 1)
    return int(match.group(1)), float(match.group(2))


def _read_table(path: PathLike) -> Tuple[np.ndarray, int, float]:
    path = Path(path)
    with open(path, 'r') as f:
        header = f.readline()
    n, r0 = parse_header(header)
    frame = pd.read_csv(path, sep=r'\s+', comment='#', header=None, dtype=float,
                        float_precision='round_trip')
    return frame.to_numpy(), n, r0


def read_matrix_file(path: PathLike) -> Tuple[np.ndarray, float]:
    """Dense kernel U(r_j, r_k) on the nodes 1..N, row-major"""
    table, n, r0 = _read_table(path)
    if table.shape != (n, n):
        raise ProblemSyntaxError(f"matrix file {path} holds {table.shape[0]}x{table.shape[1]} values, header says n={n}",
                                 2, 1)
    return table, r0


def read_wavefunction_file(path: PathLike) -> Tuple[np.ndarray, np.ndarray, float]:
    """Two columns r_j, u(r_j) on the nodes 1..N"""
    table, n, r0 = _read_table(path)
    if table.ndim != 2 or table.shape != (n, 2):
        raise ProblemSyntaxError(f"wavefunction file {path} must hold {n} rows of two columns", 2, 1)
    return table[:, 0], table[:, 1], r0


def write_matrix_file(path: PathLike, matrix: np.ndarray, r0: float) -> Path:
    path = Path(path)
    n = matrix.shape[0]
    np.savetxt(path, matrix, fmt=FLOAT_FORMAT, header=f"n={n} r0={r0!r}", comments='# ')
    logging.info(f"Wrote {n}x{n} kernel to {path}")
    return path


def write_wavefunction_file(path: PathLike, radii: np.ndarray, values: np.ndarray, r0: float) -> Path:
    path = Path(path)
    table = np.column_stack([radii, values])
    np.savetxt(path, table, fmt=FLOAT_FORMAT, header=f"n={radii.size} r0={r0!r}", comments='# ')
    logging.info(f"Wrote wavefunction with {radii.size} nodes to {path}")
    return path


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(payload: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2, default=_json_default)
        f.write('\n')
    return path
