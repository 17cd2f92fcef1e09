"""
Cylinder functions J_m, N_m, I_m, K_m with first derivatives.

Everything is evaluated in real arithmetic: the imaginary-argument functions of
the free and exterior solutions are expressed through I_m and K_m, and the
constant phase factors they carry cancel in every log-derivative.
"""
import numpy as np
from scipy.special import ive, iv, jv, kv, kve, yv

from models import CylinderOverflowError, CylinderValue, DomainError

MAX_ORDER = 50


def _check_order(m: int) -> int:
    if int(m) != m or m < 0:
        raise DomainError(f"order must be a non-negative integer, got {m!r}")
    if m > MAX_ORDER:
        raise DomainError(f"order {m} exceeds supported maximum {MAX_ORDER}")
    return int(m)


def bessel_j(m: int, x: float) -> CylinderValue:
    """J_m(x) and J'_m(x); x = 0 returns the series limit"""
    m = _check_order(m)
    if x < 0:
        raise DomainError(f"bessel_j argument must be non-negative, got {x!r}")
    x = float(x)
    value = float(jv(m, x))
    if m == 0:
        derivative = -float(jv(1, x))
    else:
        # J'_m = (J_{m-1} - J_{m+1}) / 2 has no 1/x and is exact at x = 0
        derivative = 0.5 * float(jv(m - 1, x) - jv(m + 1, x))
    return CylinderValue(m, x, value, derivative)


def bessel_n(m: int, x: float) -> CylinderValue:
    """Neumann function N_m(x) = Y_m(x) and its derivative"""
    m = _check_order(m)
    if x <= 0:
        raise DomainError(f"bessel_n argument must be positive, got {x!r}")
    x = float(x)
    value = float(yv(m, x))
    if m == 0:
        derivative = -float(yv(1, x))
    else:
        derivative = 0.5 * float(yv(m - 1, x) - yv(m + 1, x))
    return CylinderValue(m, x, value, derivative)


def bessel_i(m: int, x: float, scaled: bool = False) -> CylinderValue:
    """I_m(x); with ``scaled`` both value and derivative carry the factor e^{-x}"""
    m = _check_order(m)
    if x < 0:
        raise DomainError(f"bessel_i argument must be non-negative, got {x!r}")
    x = float(x)
    func = ive if scaled else iv
    value = float(func(m, x))
    if m == 0:
        derivative = float(func(1, x))
    else:
        derivative = 0.5 * float(func(m - 1, x) + func(m + 1, x))
    if not (np.isfinite(value) and np.isfinite(derivative)):
        raise CylinderOverflowError(f"I_{m}({x}) overflows; use scaled=True")
    return CylinderValue(m, x, value, derivative, scaled)


def bessel_k(m: int, x: float, scaled: bool = False) -> CylinderValue:
    """K_m(x); with ``scaled`` both value and derivative carry the factor e^{x}"""
    m = _check_order(m)
    if x <= 0:
        raise DomainError(f"bessel_k argument must be positive, got {x!r}")
    x = float(x)
    func = kve if scaled else kv
    value = float(func(m, x))
    if m == 0:
        derivative = -float(func(1, x))
    else:
        derivative = -0.5 * float(func(m - 1, x) + func(m + 1, x))
    if not (np.isfinite(value) and np.isfinite(derivative)):
        raise CylinderOverflowError(f"K_{m}({x}) not representable")
    if not scaled and value == 0.0:
        raise CylinderOverflowError(f"K_{m}({x}) underflows; use scaled=True")
    return CylinderValue(m, x, value, derivative, scaled)


def k_log_derivative(m: int, x: float) -> float:
    """x K'_m(x) / K_m(x), stable for tiny and huge x.

    Uses the forward recurrence for K_{m+1}/K_m, which is stable for K.
    """
    m = _check_order(m)
    if x <= 0:
        raise DomainError(f"argument must be positive, got {x!r}")
    k0 = kve(0, x)
    k1 = kve(1, x)
    if not np.isfinite(k1) or k0 == 0.0:
        # x below ~1e-300: leading small-argument forms
        return -1.0 / np.log(2.0 / x) if m == 0 else float(-m)
    ratio = k1 / k0
    for order in range(1, m + 1):
        ratio = 1.0 / ratio + 2.0 * order / x
    # K'_m = (m/x) K_m - K_{m+1}
    return float(m - x * ratio)


def i_log_derivative(m: int, x: float) -> float:
    """x I'_m(x) / I_m(x); tends to m as x -> 0"""
    m = _check_order(m)
    if x < 0:
        raise DomainError(f"argument must be non-negative, got {x!r}")
    if x == 0.0:
        return float(m)
    lower = ive(m, x)
    upper = ive(m + 1, x)
    if lower == 0.0 or not np.isfinite(lower):
        ratio = x / (2.0 * (m + 1))
    else:
        ratio = upper / lower
    # I'_m = (m/x) I_m + I_{m+1}
    return float(m + x * ratio)


def wronskian_jn(m: int, x: float) -> float:
    """J_m N'_m - J'_m N_m, identically 2/(pi x)"""
    j = bessel_j(m, x)
    n = bessel_n(m, x)
    return j.value * n.derivative - j.derivative * n.value


def wronskian_ik(m: int, x: float) -> float:
    """I_m K'_m - I'_m K_m, identically -1/x"""
    i = bessel_i(m, x, scaled=True)
    k = bessel_k(m, x, scaled=True)
    # e^{-x} e^{x} scaling cancels in the product
    return i.value * k.derivative - i.derivative * k.value
