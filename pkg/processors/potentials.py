"""
Local potentials, non-local kernels and the partial-wave problem document.

Every shape vanishes for r >= its cutoff. The coupling lambda multiplies both
the local potential and the kernel; ``depth`` multiplies the local potential
alone and is only used by depth-axis sweeps.
"""
import json
import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from config import Config
from models import DimensionError, DomainError, ProblemSyntaxError, ValidationError
from utils.io import read_matrix_file, read_wavefunction_file
from utils.validators import ProblemValidator


class ShapeKind(Enum):
    ZERO = "zero"
    PIECEWISE = "piecewise"
    GAUSSIAN = "gaussian"
    TABULATED = "tabulated"
    POWER = "power"


@dataclass(frozen=True, eq=False)
class LocalPotential:
    kind: ShapeKind
    cutoff: float
    segments: Tuple[Tuple[float, float, float], ...] = ()
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0
    exponent: float = 0.0
    sample_radii: Tuple[float, ...] = ()
    sample_values: Tuple[float, ...] = ()
    source: Optional[str] = None

    @classmethod
    def zero(cls, cutoff: float) -> 'LocalPotential':
        return cls(ShapeKind.ZERO, cutoff)

    @classmethod
    def square_well(cls, depth: float, radius: float) -> 'LocalPotential':
        """V = -depth on [0, radius)"""
        return cls(ShapeKind.PIECEWISE, radius, segments=((0.0, radius, -depth),))

    @classmethod
    def gaussian(cls, amplitude: float, center: float, width: float, cutoff: float) -> 'LocalPotential':
        return cls(ShapeKind.GAUSSIAN, cutoff, amplitude=amplitude, center=center, width=width)

    @classmethod
    def tabulated(cls, radii, values, cutoff: float, source: Optional[str] = None) -> 'LocalPotential':
        return cls(ShapeKind.TABULATED, cutoff, sample_radii=tuple(float(r) for r in radii),
                   sample_values=tuple(float(v) for v in values), source=source)

    @property
    def is_zero(self) -> bool:
        if self.kind is ShapeKind.ZERO:
            return True
        if self.kind is ShapeKind.PIECEWISE:
            return all(value == 0.0 for _, _, value in self.segments)
        if self.kind is ShapeKind.TABULATED:
            return not any(self.sample_values)
        return self.amplitude == 0.0

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind is ShapeKind.ZERO:
            values = np.zeros_like(r)
        elif self.kind is ShapeKind.PIECEWISE:
            values = np.zeros_like(r)
            for lo, hi, value in self.segments:
                values = np.where((r >= lo) & (r < hi), value, values)
        elif self.kind is ShapeKind.GAUSSIAN:
            values = self.amplitude * np.exp(-((r - self.center) / self.width) ** 2)
        elif self.kind is ShapeKind.TABULATED:
            values = np.interp(r, self.sample_radii, self.sample_values, right=0.0)
        else:
            with np.errstate(divide='ignore', over='ignore'):
                values = self.amplitude * np.power(np.where(r > 0, r, np.inf if self.exponent < 0 else 0.0),
                                                   self.exponent)
        return np.where(r < self.cutoff, values, 0.0)

    def to_dict(self) -> Dict[str, Any]:
        document: Dict[str, Any] = {'type': self.kind.value, 'cutoff': self.cutoff}
        if self.kind is ShapeKind.PIECEWISE:
            document['segments'] = [list(segment) for segment in self.segments]
        elif self.kind is ShapeKind.GAUSSIAN:
            document.update(amplitude=self.amplitude, center=self.center, width=self.width)
        elif self.kind is ShapeKind.POWER:
            document.update(amplitude=self.amplitude, exponent=self.exponent)
        elif self.kind is ShapeKind.TABULATED:
            document.update(r=list(self.sample_radii), v=list(self.sample_values))
        return document


@dataclass(frozen=True, eq=False)
class SeparableTerm:
    """c * g(r) * g(r')"""
    coefficient: float
    shape: LocalPotential


@dataclass(frozen=True, eq=False)
class SymmetricKernel:
    """U(r, r') = U(r', r), either separable or a dense matrix on the nodes 1..N"""
    terms: Tuple[SeparableTerm, ...] = ()
    matrix: Optional[np.ndarray] = None
    source: Optional[str] = None

    @property
    def is_separable(self) -> bool:
        return self.matrix is None

    @property
    def cutoff(self) -> float:
        return max((term.shape.cutoff for term in self.terms), default=0.0)

    def values(self, grid: 'RadialGrid') -> np.ndarray:
        """U(r_j, r_k) on the nodes 1..N"""
        if self.matrix is not None:
            if self.matrix.shape != (grid.n_points, grid.n_points):
                raise DimensionError(f"kernel matrix {self.matrix.shape} on a grid of {grid.n_points} nodes")
            return self.matrix
        kernel = np.zeros((grid.n_points, grid.n_points))
        for term in self.terms:
            g = term.shape(grid.nodes)
            kernel += term.coefficient * np.outer(g, g)
        return kernel


@dataclass(frozen=True, eq=False)
class SaitoProjector:
    """Redundant-state operator u(r) ∫ u(s) [d²/ds² - V(s) - (m² - 1/4)/s²] R(s) ds"""
    u: np.ndarray
    local_ref: LocalPotential
    m_ref: int
    source: Optional[str] = None
    origin: Optional[float] = None  # phi(0) when known exactly; extrapolated otherwise


NonlocalOperator = Union[SymmetricKernel, SaitoProjector]


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid r_j = j h, h = r0 / N; the origin node is kept for the solver"""
    n_points: int
    r0: float

    @property
    def h(self) -> float:
        return self.r0 / self.n_points

    @property
    def full_nodes(self) -> np.ndarray:
        nodes = np.arange(self.n_points + 1) * self.h
        nodes[-1] = self.r0
        return nodes

    @property
    def nodes(self) -> np.ndarray:
        return self.full_nodes[1:]

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights on the nodes 1..N (the origin term vanishes for R)"""
        weights = np.full(self.n_points, self.h)
        weights[-1] = 0.5 * self.h
        return weights

    @property
    def volumes(self) -> np.ndarray:
        """Cell volumes ∫ r dr of the flux discretization on the nodes 0..N"""
        volumes = self.full_nodes * self.h
        volumes[0] = self.h ** 2 / 8.0
        volumes[-1] = 0.0
        return volumes

    def cell_average(self, func) -> np.ndarray:
        """r-weighted average of func over each balance cell (the boundary node keeps its point value).

        A step at a node is seen as half on each side, so steps anywhere stay
        second-order accurate.
        """
        points, weights = np.polynomial.legendre.leggauss(4)
        nodes = self.full_nodes
        lo = np.maximum(nodes - 0.5 * self.h, 0.0)
        hi = nodes + 0.5 * self.h
        radii = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * points[None, :]
        weighted = weights[None, :] * radii
        averages = np.sum(weighted * func(radii), axis=1) / np.sum(weighted, axis=1)
        averages[-1] = float(func(nodes[-1:])[0])
        return averages


@dataclass(frozen=True, eq=False)
class PartialWaveProblem:
    m: int
    local: LocalPotential
    nonlocal_op: Optional[NonlocalOperator]
    lam: float
    r0: float
    grid: RadialGrid
    depth: float = 1.0
    name: str = ''
    tune_critical: bool = False

    @property
    def is_free(self) -> bool:
        return self.lam == 0.0 or (self.local_is_zero and self.nonlocal_op is None)

    @property
    def local_is_zero(self) -> bool:
        return self.depth == 0.0 or self.local.is_zero

    def local_values(self, radii: np.ndarray) -> np.ndarray:
        """Effective local potential lambda * depth * V(r)"""
        return self.lam * self.depth * self.local(radii)

    def grid_potential(self) -> np.ndarray:
        """Effective local potential averaged over the balance cells"""
        return self.lam * self.depth * self.grid.cell_average(self.local)


def make_problem(m: int, local: LocalPotential, r0: float, nonlocal_op: Optional[NonlocalOperator] = None,
                 lam: float = 1.0, grid_points: Optional[int] = None, name: str = '') -> PartialWaveProblem:
    """Build and validate a problem from in-memory parts"""
    n_points = grid_points or Config.GRID_POINTS
    problem = PartialWaveProblem(m, local, nonlocal_op, lam, r0, RadialGrid(n_points, r0), name=name)
    validate_problem(problem)
    return problem


def scale(problem: PartialWaveProblem, lam: float) -> PartialWaveProblem:
    """Couple the potentials with lambda; scale(scale(p, a), b) == scale(p, a * b)"""
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam!r}")
    return replace(problem, lam=problem.lam * lam)


def with_depth(problem: PartialWaveProblem, depth: float) -> PartialWaveProblem:
    """Set the local depth multiplier, leaving the kernel untouched"""
    return replace(problem, depth=float(depth))


def with_grid(problem: PartialWaveProblem, n_points: int) -> PartialWaveProblem:
    if isinstance(problem.nonlocal_op, SymmetricKernel) and not problem.nonlocal_op.is_separable:
        raise DimensionError("a tabulated kernel is tied to its grid")
    if isinstance(problem.nonlocal_op, SaitoProjector):
        raise DimensionError("a Saito wavefunction is tied to its grid")
    return replace(problem, grid=RadialGrid(n_points, problem.r0))


def combine_kernels(first: SymmetricKernel, alpha: float, second: SymmetricKernel,
                    beta: float) -> SymmetricKernel:
    """alpha * U1 + beta * U2"""
    if first.is_separable and second.is_separable:
        terms = tuple(SeparableTerm(alpha * t.coefficient, t.shape) for t in first.terms)
        terms += tuple(SeparableTerm(beta * t.coefficient, t.shape) for t in second.terms)
        return SymmetricKernel(terms=terms)
    if first.matrix is None or second.matrix is None:
        raise DimensionError("mixing separable and tabulated kernels needs a grid; materialize first")
    return SymmetricKernel(matrix=alpha * first.matrix + beta * second.matrix)


def reduced_origin_value(reduced_tail: np.ndarray, m: int) -> float:
    """phi(0) from phi(h), phi(2h): even extrapolation for m = 0, zero otherwise"""
    if m > 0:
        return 0.0
    return float((4.0 * reduced_tail[0] - reduced_tail[1]) / 3.0)


def radial_to_reduced(values: np.ndarray, grid: RadialGrid, m: int) -> np.ndarray:
    """R on the nodes 1..N to phi = R / sqrt(r) on the nodes 0..N"""
    tail = values / np.sqrt(grid.nodes)
    return np.concatenate([[reduced_origin_value(tail, m)], tail])


def projector_reduced(projector: SaitoProjector, grid: RadialGrid, m: int) -> np.ndarray:
    """phi = u / sqrt(r) on the nodes 0..N"""
    reduced = radial_to_reduced(projector.u, grid, m)
    if projector.origin is not None:
        reduced[0] = projector.origin
    return reduced


def saito_norm_squared(projector: SaitoProjector, grid: RadialGrid, m: int) -> float:
    reduced = projector_reduced(projector, grid, m)
    return float(np.sum(grid.volumes * reduced ** 2))


def max_effective_strength(problem: PartialWaveProblem) -> float:
    """Largest |V_eff| plus the row-sum bound of the effective kernel, in energy units"""
    radii = np.linspace(0.0, problem.r0, 4 * problem.grid.n_points + 1)
    strength = float(np.max(np.abs(problem.local_values(radii))))
    op = problem.nonlocal_op
    if isinstance(op, SymmetricKernel):
        volumes = problem.grid.volumes[1:]
        strength += abs(problem.lam) * float(np.max(np.abs(op.values(problem.grid)) @ volumes))
    elif isinstance(op, SaitoProjector):
        strength += abs(problem.lam) * float(np.max(np.abs(op.local_ref(radii)))) + (op.m_ref ** 2 + 1) / problem.r0 ** 2
    return strength


def _check(result: Tuple[bool, Optional[str]], field_name: str) -> None:
    valid, message = result
    if not valid:
        raise ValidationError(field_name, message)


def _validate_shape(shape: LocalPotential, r0: float, field_name: str) -> None:
    _check(ProblemValidator.validate_cutoff(shape.cutoff, r0), field_name)
    if shape.kind is ShapeKind.PIECEWISE:
        _check(ProblemValidator.validate_segments(shape.segments), field_name)
    elif shape.kind is ShapeKind.TABULATED:
        _check(ProblemValidator.validate_samples(shape.sample_radii, shape.sample_values), field_name)
    elif shape.kind is ShapeKind.GAUSSIAN:
        _check(ProblemValidator.validate_width(shape.width), field_name)
    _check(ProblemValidator.validate_origin(shape, r0), field_name)


def validate_problem(problem: PartialWaveProblem) -> None:
    """Raise ValidationError naming the first violated invariant"""
    _check(ProblemValidator.validate_order(problem.m), 'm')
    _check(ProblemValidator.validate_radius(problem.r0), 'r0')
    _check(ProblemValidator.validate_lambda(problem.lam), 'lambda')
    _check(ProblemValidator.validate_grid_points(problem.grid.n_points), 'grid_points')
    _validate_shape(problem.local, problem.r0, 'local')
    op = problem.nonlocal_op
    if isinstance(op, SymmetricKernel):
        if op.is_separable:
            for index, term in enumerate(op.terms):
                _validate_shape(term.shape, problem.r0, f'nonlocal.terms[{index}]')
        else:
            _check(ProblemValidator.validate_matrix(op.matrix, problem.grid.n_points), 'nonlocal.matrix')
    elif isinstance(op, SaitoProjector):
        if op.m_ref != problem.m:
            raise ValidationError('nonlocal.m', f"Saito order {op.m_ref} differs from problem order {problem.m}")
        if op.u.size != problem.grid.n_points:
            raise ValidationError('nonlocal.u', f"wavefunction has {op.u.size} values, grid has {problem.grid.n_points}")
        _validate_shape(op.local_ref, problem.r0, 'nonlocal.local')
        _check(ProblemValidator.validate_normalization(saito_norm_squared(op, problem.grid, problem.m)), 'nonlocal.u')
        _check(ProblemValidator.validate_decay(op.u), 'nonlocal.u')


def _shape_from_document(document: Dict[str, Any], r0: float, base_dir: Path, field_name: str) -> LocalPotential:
    if not isinstance(document, dict) or 'type' not in document:
        raise ValidationError(field_name, "shape needs a 'type'")
    try:
        kind = ShapeKind(document['type'])
    except ValueError:
        raise ValidationError(field_name, f"unknown shape type {document['type']!r}")
    cutoff = float(document.get('cutoff', r0))
    try:
        if kind is ShapeKind.ZERO:
            return LocalPotential.zero(cutoff)
        if kind is ShapeKind.PIECEWISE:
            segments = tuple(tuple(float(x) for x in segment) for segment in document['segments'])
            return LocalPotential(kind, cutoff, segments=segments)
        if kind is ShapeKind.GAUSSIAN:
            return LocalPotential.gaussian(float(document['amplitude']), float(document.get('center', 0.0)),
                                           float(document['width']), cutoff)
        if kind is ShapeKind.POWER:
            return LocalPotential(kind, cutoff, amplitude=float(document['amplitude']),
                                  exponent=float(document['exponent']))
        if 'file' in document:
            path = base_dir / document['file']
            radii, values, _ = read_wavefunction_file(path)
            return LocalPotential.tabulated(radii, values, cutoff, source=document['file'])
        return LocalPotential.tabulated(document['r'], document['v'], cutoff)
    except KeyError as e:
        raise ValidationError(field_name, f"missing field {e.args[0]!r}")


def _nonlocal_from_document(document: Dict[str, Any], m: int, r0: float, local: LocalPotential,
                            n_points: int, base_dir: Path) -> NonlocalOperator:
    kind = document.get('type')
    if kind == 'separable':
        terms = []
        for index, term in enumerate(document.get('terms', [])):
            field_name = f'nonlocal.terms[{index}]'
            if 'coefficient' not in term or 'shape' not in term:
                raise ValidationError(field_name, "term needs 'coefficient' and 'shape'")
            terms.append(SeparableTerm(float(term['coefficient']),
                                       _shape_from_document(term['shape'], r0, base_dir, field_name)))
        if not terms:
            raise ValidationError('nonlocal.terms', "separable kernel needs at least one term")
        return SymmetricKernel(terms=tuple(terms))
    if kind == 'matrix':
        if 'file' in document:
            matrix, file_r0 = read_matrix_file(base_dir / document['file'])
            if abs(file_r0 - r0) > 1e-12 * r0:
                raise ValidationError('nonlocal.file', f"kernel file r0={file_r0!r} differs from r0={r0!r}")
            return SymmetricKernel(matrix=matrix, source=document['file'])
        if 'values' in document:
            return SymmetricKernel(matrix=np.asarray(document['values'], dtype=float))
        raise ValidationError('nonlocal', "matrix kernel needs 'file' or 'values'")
    if kind == 'saito':
        local_ref = local
        if 'local' in document:
            local_ref = _shape_from_document(document['local'], r0, base_dir, 'nonlocal.local')
        m_ref = int(document.get('m', m))
        if 'file' in document:
            radii, values, _ = read_wavefunction_file(base_dir / document['file'])
            grid = RadialGrid(n_points, r0)
            if radii.size != n_points or np.max(np.abs(radii - grid.nodes)) > 1e-9 * r0:
                raise ValidationError('nonlocal.file', "wavefunction nodes do not match the grid")
            return SaitoProjector(values, local_ref, m_ref, source=document['file'], origin=document.get('origin'))
        if 'u' in document:
            return SaitoProjector(np.asarray(document['u'], dtype=float), local_ref, m_ref, origin=document.get('origin'))
        raise ValidationError('nonlocal', "saito operator needs 'file' or 'u'")
    raise ValidationError('nonlocal.type', f"unknown non-local type {kind!r}")


def parse_problem(text: str, base_dir: Union[str, Path, None] = None) -> PartialWaveProblem:
    """Parse and validate a JSON problem document"""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemSyntaxError(e.msg, e.lineno, e.colno)
    if not isinstance(document, dict):
        raise ProblemSyntaxError("top level must be an object", 1, 1)
    base_dir = Path(base_dir) if base_dir is not None else Path('.')

    for required in ('m', 'r0', 'local'):
        if required not in document:
            raise ValidationError(required, "field is required")
    _check(ProblemValidator.validate_order(document['m']), 'm')
    _check(ProblemValidator.validate_radius(document['r0']), 'r0')
    m = document['m']
    r0 = float(document['r0'])
    lam = document.get('lambda', 1.0)
    _check(ProblemValidator.validate_lambda(lam), 'lambda')
    n_points = document.get('grid_points', Config.GRID_POINTS)
    _check(ProblemValidator.validate_grid_points(n_points), 'grid_points')

    local = _shape_from_document(document['local'], r0, base_dir, 'local')
    nonlocal_op = None
    if document.get('nonlocal') is not None:
        nonlocal_op = _nonlocal_from_document(document['nonlocal'], m, r0, local, n_points, base_dir)

    problem = PartialWaveProblem(m, local, nonlocal_op, float(lam), r0, RadialGrid(n_points, r0),
                                 depth=float(document.get('depth', 1.0)), name=str(document.get('name', '')),
                                 tune_critical=bool(document.get('tune_critical', False)))
    validate_problem(problem)
    logging.info(f"Parsed problem '{problem.name}' (m={m}, r0={r0}, N={n_points})")
    return problem


def load_problem(path: Union[str, Path]) -> PartialWaveProblem:
    path = Path(path)
    with open(path, 'r') as f:
        text = f.read()
    problem = parse_problem(text, base_dir=path.parent)
    if not problem.name:
        problem = replace(problem, name=path.stem)
    return problem


def serialize_problem(problem: PartialWaveProblem) -> str:
    """JSON document that parses back to an equivalent problem"""
    document: Dict[str, Any] = {
        'name': problem.name,
        'm': problem.m,
        'r0': problem.r0,
        'lambda': problem.lam,
        'grid_points': problem.grid.n_points,
        'local': problem.local.to_dict(),
    }
    if problem.depth != 1.0:
        document['depth'] = problem.depth
    if problem.tune_critical:
        document['tune_critical'] = True
    op = problem.nonlocal_op
    if isinstance(op, SymmetricKernel):
        if op.is_separable:
            document['nonlocal'] = {
                'type': 'separable',
                'terms': [{'coefficient': t.coefficient, 'shape': t.shape.to_dict()} for t in op.terms],
            }
        elif op.source:
            document['nonlocal'] = {'type': 'matrix', 'file': op.source}
        else:
            document['nonlocal'] = {'type': 'matrix', 'values': op.matrix.tolist()}
    elif isinstance(op, SaitoProjector):
        saito: Dict[str, Any] = {'type': 'saito', 'm': op.m_ref, 'local': op.local_ref.to_dict()}
        if op.source:
            saito['file'] = op.source
        else:
            saito['u'] = op.u.tolist()
        if op.origin is not None:
            saito['origin'] = op.origin
        document['nonlocal'] = saito
    return json.dumps(document, indent=2)
