import numpy as np
import pytest

from processors.potentials import with_grid
from processors.scattering import phase_shift
from processors.spectrum import find_bound_states
from tests.conftest import bundled

pytestmark = pytest.mark.slow


@pytest.mark.parametrize('name', ['well_m1_n1', 'gaussian_m0', 'separable_m1_well'])
def test_phase_shift_converges_at_second_order(name):
    problem = bundled(name)
    for k in (0.5, 2.0):
        coarse, medium, fine = (phase_shift(with_grid(problem, n), k) for n in (1000, 2000, 4000))
        # error ratio 4 for a second-order scheme; 3 leaves room for higher-order terms
        assert abs(medium - coarse) >= 3.0 * abs(fine - medium)


def test_bound_energies_converge():
    problem = bundled('well_m0_n3')
    levels = [np.array(find_bound_states(with_grid(problem, n), extrapolate=False)) for n in (1000, 2000, 4000)]
    assert np.all(np.abs(levels[1] - levels[0]) >= 3.0 * np.abs(levels[2] - levels[1]))
