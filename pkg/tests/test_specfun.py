import numpy as np
import pytest
from scipy.special import ivp, iv, jvp, kvp, kv, yvp

from models import CylinderOverflowError, DomainError
from processors.specfun import (bessel_i, bessel_j, bessel_k, bessel_n, i_log_derivative, k_log_derivative,
                                wronskian_ik, wronskian_jn)


@pytest.mark.parametrize('m', [0, 1, 2, 5])
@pytest.mark.parametrize('x', [0.01, 0.7, 3.0, 25.0])
def test_derivatives_match_scipy(m, x):
    assert np.isclose(bessel_j(m, x).derivative, jvp(m, x), rtol=1e-12, atol=1e-15)
    assert np.isclose(bessel_n(m, x).derivative, yvp(m, x), rtol=1e-12)
    assert np.isclose(bessel_i(m, x).derivative, ivp(m, x), rtol=1e-12, atol=1e-300)
    assert np.isclose(bessel_k(m, x).derivative, kvp(m, x), rtol=1e-12)


@pytest.mark.parametrize('m', range(1, 10))
@pytest.mark.parametrize('x', [0.5, 2.0, 9.0, 40.0])
def test_three_term_recurrences(m, x):
    for func in (bessel_j, bessel_n):
        below, centre, above = (func(order, x).value for order in (m - 1, m, m + 1))
        scale = max(abs(below), abs(centre * 2 * m / x), abs(above))
        assert abs(above - (2 * m / x * centre - below)) <= 1e-10 * scale
    below, centre, above = (bessel_i(order, x).value for order in (m - 1, m, m + 1))
    assert abs(above - (below - 2 * m / x * centre)) <= 1e-10 * max(abs(below), abs(2 * m / x * centre))
    below, centre, above = (bessel_k(order, x).value for order in (m - 1, m, m + 1))
    assert abs(above - (below + 2 * m / x * centre)) <= 1e-10 * abs(above)


@pytest.mark.parametrize('func', [bessel_j, bessel_n, bessel_i, bessel_k])
@pytest.mark.parametrize('m', [0, 1, 2, 5])
@pytest.mark.parametrize('x', [0.3, 2.0, 7.5, 30.0])
def test_derivative_matches_central_difference(func, m, x):
    step = 1e-6 * x
    value = func(m, x)
    numeric = (func(m, x + step).value - func(m, x - step).value) / (2 * step)
    assert abs(numeric - value.derivative) <= 1e-6 * max(abs(value.derivative), abs(value.value) / x)


@pytest.mark.parametrize('m', range(11))
@pytest.mark.parametrize('x', [0.01, 0.1, 1.0, 10.0, 100.0])
def test_wronskian_lattice(m, x):
    assert abs(wronskian_jn(m, x) * np.pi * x / 2.0 - 1.0) <= 1e-12
    assert abs(wronskian_ik(m, x) * x + 1.0) <= 1e-12


def test_wronskian_at_one():
    assert [wronskian_jn(m, 1.0) for m in range(6)] == pytest.approx([2.0 / np.pi] * 6, rel=1e-12)
    assert wronskian_ik(0, 1.0) == pytest.approx(-1.0, rel=1e-12)


def test_j_at_origin():
    assert bessel_j(0, 0.0).value == 1.0
    assert bessel_j(1, 0.0).derivative == 0.5
    assert bessel_j(2, 0.0).derivative == 0.0


@pytest.mark.parametrize('m', [0, 1, 3])
@pytest.mark.parametrize('x', [1e-3, 0.5, 4.0, 40.0])
def test_wronskians(m, x):
    assert np.isclose(wronskian_jn(m, x), 2.0 / (np.pi * x), rtol=1e-10)
    assert np.isclose(wronskian_ik(m, x), -1.0 / x, rtol=1e-10)


@pytest.mark.parametrize('m', [0, 1, 2, 4])
@pytest.mark.parametrize('x', [0.05, 1.0, 8.0])
def test_log_derivatives(m, x):
    assert np.isclose(k_log_derivative(m, x), x * kvp(m, x) / kv(m, x), rtol=1e-10)
    assert np.isclose(i_log_derivative(m, x), x * ivp(m, x) / iv(m, x), rtol=1e-10)


def test_log_derivative_limits():
    assert i_log_derivative(3, 0.0) == 3.0
    assert np.isclose(k_log_derivative(1, 1e-8), -1.0, atol=1e-6)
    assert np.isclose(k_log_derivative(2, 1e-8), -2.0, atol=1e-6)
    # K_0 log-derivative decays like -1/ln(2/x)
    assert -0.1 < k_log_derivative(0, 1e-12) < 0.0
    # scaled functions keep large arguments finite
    assert np.isclose(k_log_derivative(0, 800.0), -800.0, rtol=1e-3)


def test_scaled_values_survive_large_arguments():
    with pytest.raises(CylinderOverflowError):
        bessel_i(0, 1000.0)
    with pytest.raises(CylinderOverflowError):
        bessel_k(0, 1000.0)
    assert np.isfinite(bessel_i(0, 1000.0, scaled=True).value)
    assert bessel_k(0, 1000.0, scaled=True).value > 0.0


@pytest.mark.parametrize('call', [
    lambda: bessel_j(-1, 1.0),
    lambda: bessel_j(1.5, 1.0),
    lambda: bessel_j(0, -1.0),
    lambda: bessel_n(0, 0.0),
    lambda: bessel_k(1, 0.0),
    lambda: bessel_i(51, 1.0),
])
def test_domain_errors(call):
    with pytest.raises(DomainError):
        call()
