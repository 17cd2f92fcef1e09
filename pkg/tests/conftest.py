from pathlib import Path

import pytest

from config import Config
from processors.potentials import LocalPotential, load_problem, make_problem

PROBLEMS = Path(__file__).resolve().parent.parent / 'problems'


def problem_path(name: str) -> Path:
    return PROBLEMS / f"{name}.json"


def bundled(name: str):
    return load_problem(problem_path(name))


def square_well(m: int, v0: float, r0: float = 1.0, grid_points: int = 2000, lam: float = 1.0):
    return make_problem(m, LocalPotential.square_well(v0, r0), r0, lam=lam, grid_points=grid_points,
                        name=f"well_m{m}_{v0:g}")


@pytest.fixture(autouse=True)
def restore_config():
    """The CLI writes flag values onto Config; keep tests independent of each other"""
    saved = {name: value for name, value in vars(Config).items() if name.isupper()}
    yield
    for name, value in saved.items():
        setattr(Config, name, value)

