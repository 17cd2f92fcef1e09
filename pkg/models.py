"""
Result records, enums and the error hierarchy shared by every processor.

Records are plain dataclasses; each exposes ``to_dict()`` so reports can be
serialized without knowing the record internals.
"""
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np


class LevinsonError(Exception):
    """Base class for every error raised by the solver stack"""


class DomainError(LevinsonError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class CylinderOverflowError(LevinsonError, OverflowError):
    """Unscaled modified Bessel value is not representable"""


class DimensionError(LevinsonError, ValueError):
    """Array shapes do not match the radial grid"""


class ValidationError(LevinsonError):
    """A problem document violates a named invariant"""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        self.message = message
        super().__init__(f"{field_name}: {message}")


class ProblemSyntaxError(LevinsonError):
    """Problem document is not well-formed JSON"""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class SingularSystemError(LevinsonError):
    """Discretized interior operator is numerically rank-deficient"""

    def __init__(self, energy: float, measure: float):
        self.energy = energy
        self.measure = measure
        super().__init__(f"interior system singular at E={energy!r} (measure {measure:.3e})")


class RefinementLimitError(LevinsonError):
    """Adaptive step halving could not resolve a jump"""


class ScanResolutionError(LevinsonError):
    """Energy scan could not resolve the matching-angle sweep"""


class NonConvergenceError(LevinsonError):
    """Zero-momentum phase shift stayed ambiguous down the k ladder"""


class NoBoundStateError(LevinsonError):
    """Operation requires a bound state and the problem has none"""


class Side(Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"


class HalfBound(Enum):
    NONE = "none"
    M0_HALF = "m0_half"
    M1_HALF = "m1_half"
    BOUND_AT_ZERO = "bound_at_zero"


class JumpConvention(Enum):
    JUMP_BY_PI = "jump_by_pi"
    CONTINUOUS = "continuous"


class CheckStatus(Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    ERROR = "ERROR"


class CrossingDirection(Enum):
    DOWN = "down"
    UP = "up"


@dataclass(frozen=True)
class CylinderValue:
    order: int
    argument: float
    value: float
    derivative: float
    scaled: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'order': self.order,
            'argument': self.argument,
            'value': self.value,
            'derivative': self.derivative,
            'scaled': self.scaled,
        }


@dataclass(frozen=True)
class LogDerivative:
    """Boundary log-derivative kept in Prüfer form so poles are ordinary points"""
    prufer: float
    side: Side
    radius: float

    @property
    def is_pole(self) -> bool:
        return abs(np.cos(self.prufer)) < 1e-14

    @property
    def value(self) -> float:
        if self.is_pole:
            return float(np.copysign(np.inf, np.sin(self.prufer)))
        return float(np.tan(self.prufer))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'value': None if self.is_pole else self.value,
            'pole': self.is_pole,
            'prufer': self.prufer,
            'side': self.side.value,
        }


@dataclass
class InteriorSolution:
    """Regular interior solution.

    ``reduced`` holds phi = R / sqrt(r) on the nodes 0..N (origin included) and
    ``volumes`` the matching cell volumes of the flux discretization; the
    boundary cell carries zero volume because no equation is written there.
    """
    energy: float
    radii: np.ndarray
    reduced: np.ndarray
    volumes: np.ndarray
    boundary_value: float
    boundary_derivative: float
    node_count: int

    @property
    def values(self) -> np.ndarray:
        """R on the nodes 1..N"""
        return np.sqrt(self.radii[1:]) * self.reduced[1:]

    @property
    def boundary_prufer(self) -> float:
        return float(np.arctan2(self.boundary_derivative, self.boundary_value))

    @property
    def log_derivative(self) -> float:
        if self.boundary_value == 0.0:
            return float(np.copysign(np.inf, self.boundary_derivative))
        return self.boundary_derivative / self.boundary_value

    @property
    def norm_squared(self) -> float:
        """∫₀^{r0} R² dr = ∫₀^{r0} phi² r dr on the cell volumes"""
        return float(np.sum(self.volumes * self.reduced ** 2))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'energy': self.energy,
            'boundary_prufer': self.boundary_prufer,
            'log_derivative': self.log_derivative,
            'node_count': self.node_count,
            'n_points': int(self.radii.size - 1),
        }


@dataclass
class PhaseShiftCurve:
    m: int
    axis_name: str
    axis: np.ndarray
    eta: np.ndarray
    raw_mod_pi: np.ndarray
    prufer: np.ndarray
    fixed_value: float
    convention: JumpConvention = JumpConvention.JUMP_BY_PI

    def to_frame(self):
        import pandas as pd
        return pd.DataFrame({
            self.axis_name: self.axis,
            'eta_unwrapped': self.eta,
            'eta_mod_pi': self.raw_mod_pi,
        })

    def to_dict(self) -> Dict[str, Any]:
        return {
            'm': self.m,
            'axis': self.axis_name,
            'fixed_value': self.fixed_value,
            'points': int(self.axis.size),
            'eta_final': float(self.eta[-1]),
            'convention': self.convention.value,
        }


@dataclass
class PositiveBoundRecord:
    energy: float
    residual: float
    jump_convention: JumpConvention = JumpConvention.JUMP_BY_PI
    phase_rise: Optional[float] = None
    window: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'energy': self.energy,
            'residual': self.residual,
            'jump_convention': self.jump_convention.value,
            'phase_rise': self.phase_rise,
            'window': self.window,
        }


@dataclass
class CrossingEvent:
    lam: float
    direction: CrossingDirection

    def to_dict(self) -> Dict[str, Any]:
        return {'lambda': self.lam, 'direction': self.direction.value}


@dataclass
class CrossingLedger:
    m: int
    lambdas: np.ndarray
    prufer: np.ndarray
    events: List[CrossingEvent]
    net_count: int
    axis_name: str = 'lambda'

    def to_frame(self):
        import pandas as pd
        return pd.DataFrame({self.axis_name: self.lambdas, 'theta_zero': self.prufer})

    def to_dict(self) -> Dict[str, Any]:
        return {
            'm': self.m,
            'axis': self.axis_name,
            'samples': int(self.lambdas.size),
            'events': [event.to_dict() for event in self.events],
            'net_count': self.net_count,
        }


@dataclass
class SpectrumReport:
    m: int
    bound_energies: List[float]
    n_m: int
    half_bound: HalfBound
    sigma: int
    eta0: Optional[float]
    levinson_residual: Optional[float]
    net_count: Optional[int]
    checks: Dict[str, CheckStatus] = field(default_factory=dict)
    errors: Dict[str, str] = field(default_factory=dict)
    positive_bound_states: List[PositiveBoundRecord] = field(default_factory=list)
    eta_k_eval: Optional[float] = None
    k_eval: Optional[float] = None

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(status is CheckStatus.PASS for status in self.checks.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'm': self.m,
            'bound_energies': list(self.bound_energies),
            'n_m': self.n_m,
            'half_bound': self.half_bound.value,
            'sigma': self.sigma,
            'eta0': self.eta0,
            'eta0_over_pi': None if self.eta0 is None else self.eta0 / np.pi,
            'eta_k_eval': self.eta_k_eval,
            'k_eval': self.k_eval,
            'levinson_residual': self.levinson_residual,
            'net_count': self.net_count,
            'checks': {name: status.value for name, status in self.checks.items()},
            'errors': dict(self.errors),
            'positive_bound_states': [record.to_dict() for record in self.positive_bound_states],
            'status': CheckStatus.PASS.value if self.passed else CheckStatus.FAIL.value,
        }


@dataclass
class OrthogonalityReport:
    energies: List[float]
    overlaps: List[float]
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_violation < self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            'energies': list(self.energies),
            'overlaps': list(self.overlaps),
            'max_violation': self.max_violation,
            'tolerance': self.tolerance,
            'status': CheckStatus.PASS.value if self.passed else CheckStatus.FAIL.value,
        }


@dataclass
class RedundantStateStatus:
    residual: float
    zero_energy_degenerate: bool
    degeneracy_measure: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance and self.zero_energy_degenerate

    def to_dict(self) -> Dict[str, Any]:
        return {
            'residual': self.residual,
            'zero_energy_degenerate': self.zero_energy_degenerate,
            'degeneracy_measure': self.degeneracy_measure,
            'tolerance': self.tolerance,
            'status': CheckStatus.PASS.value if self.passed else CheckStatus.FAIL.value,
        }


@dataclass
class RunManifest:
    command: str
    input_path: str
    output_dir: str
    parameters: Dict[str, Any]
    tool_version: str
    started_at: datetime
    finished_at: Optional[datetime] = None
    outputs: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'input': self.input_path,
            'output_dir': self.output_dir,
            'parameters': self.parameters,
            'tool_version': self.tool_version,
            'started_at': self.started_at.isoformat(),
            'finished_at': self.finished_at.isoformat() if self.finished_at else None,
            'wall_clock_seconds': (self.finished_at - self.started_at).total_seconds() if self.finished_at else None,
            'outputs': list(self.outputs),
        }
