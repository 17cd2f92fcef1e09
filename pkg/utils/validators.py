import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from config import Config


class ProblemValidator:
    """Field-level checks for partial-wave problem documents"""

    @staticmethod
    def validate_order(m) -> Tuple[bool, Optional[str]]:
        """
        Validate the angular momentum

        Returns:
            Tuple[bool, Optional[str]]: (is_valid, error_message)
        """
        if isinstance(m, bool) or not isinstance(m, int):
            return False, "angular momentum must be an integer"
        if m < 0:
            return False, "angular momentum must be non-negative"
        if m > 50:
            return False, "angular momentum above 50 is not supported"
        return True, None

    @staticmethod
    def validate_radius(r0) -> Tuple[bool, Optional[str]]:
        if not isinstance(r0, (int, float)) or isinstance(r0, bool):
            return False, "cutoff radius must be a number"
        if not math.isfinite(r0) or r0 <= 0:
            return False, "cutoff radius must be positive and finite"
        return True, None

    @staticmethod
    def validate_lambda(lam) -> Tuple[bool, Optional[str]]:
        if not isinstance(lam, (int, float)) or isinstance(lam, bool):
            return False, "lambda must be a number"
        if not 0.0 <= lam <= 1.0:
            return False, "lambda must lie in [0, 1]"
        return True, None

    @staticmethod
    def validate_grid_points(n_points) -> Tuple[bool, Optional[str]]:
        if isinstance(n_points, bool) or not isinstance(n_points, int):
            return False, "grid_points must be an integer"
        if n_points < Config.MIN_GRID_POINTS:
            return False, f"grid_points must be at least {Config.MIN_GRID_POINTS}"
        return True, None

    @staticmethod
    def validate_cutoff(cutoff: float, r0: float) -> Tuple[bool, Optional[str]]:
        if not math.isfinite(cutoff) or cutoff <= 0:
            return False, "cutoff must be positive"
        if cutoff > r0 * (1.0 + 1e-12):
            return False, f"cutoff exceeds r0 ({cutoff!r} > {r0!r})"
        return True, None

    @staticmethod
    def validate_origin(func: Callable[[np.ndarray], np.ndarray], r0: float) -> Tuple[bool, Optional[str]]:
        """
        Require (r/r0)^2 |V(r)| <= 1e-6 max|V| for r <= r0/1000, with the
        maximum taken over [r0/1000, r0]
        """
        outer = np.linspace(r0 * 1e-3, r0, 4001)
        scale = float(np.max(np.abs(func(outer))))
        if not math.isfinite(scale):
            return False, "potential is not finite on (0, r0]"
        if scale == 0.0:
            return True, None
        inner = np.geomspace(r0 * 1e-12, r0 * 1e-3, 64, endpoint=False)
        with np.errstate(over='ignore', invalid='ignore'):
            weighted = (inner / r0) ** 2 * np.abs(func(inner))
        if not np.all(np.isfinite(weighted)) or np.max(weighted) > Config.ORIGIN_TOLERANCE * scale:
            return False, "origin singularity: r^2 V(r) does not vanish at the origin"
        return True, None

    @staticmethod
    def validate_segments(segments: Sequence[Sequence[float]]) -> Tuple[bool, Optional[str]]:
        if not segments:
            return False, "piecewise shape needs at least one segment"
        previous_hi = 0.0
        for index, segment in enumerate(sorted(segments, key=lambda s: s[0])):
            if len(segment) != 3:
                return False, f"segment {index} must be [r_lo, r_hi, value]"
            lo, hi, value = segment
            if lo < 0 or hi <= lo:
                return False, f"segment {index} has an empty or negative range"
            if lo < previous_hi:
                return False, f"segment {index} overlaps the previous segment"
            if not math.isfinite(value):
                return False, f"segment {index} value is not finite"
            previous_hi = hi
        return True, None

    @staticmethod
    def validate_samples(radii: Sequence[float], values: Sequence[float]) -> Tuple[bool, Optional[str]]:
        radii = np.asarray(radii, dtype=float)
        values = np.asarray(values, dtype=float)
        if radii.size < 2 or radii.size != values.size:
            return False, "tabulated shape needs matching r and v arrays of length >= 2"
        if np.any(np.diff(radii) <= 0) or radii[0] < 0:
            return False, "tabulated radii must be non-negative and strictly increasing"
        if not np.all(np.isfinite(values)):
            return False, "tabulated values must be finite"
        return True, None

    @staticmethod
    def validate_width(width: float) -> Tuple[bool, Optional[str]]:
        if not math.isfinite(width) or width <= 0:
            return False, "gaussian width must be positive"
        return True, None

    @staticmethod
    def validate_matrix(matrix: np.ndarray, n_points: int) -> Tuple[bool, Optional[str]]:
        if matrix.shape != (n_points, n_points):
            return False, f"kernel matrix is {matrix.shape[0]}x{matrix.shape[1]}, grid has {n_points} nodes"
        if not np.all(np.isfinite(matrix)):
            return False, "kernel matrix has non-finite entries"
        scale = max(float(np.max(np.abs(matrix))), 1.0)
        if np.max(np.abs(matrix - matrix.T)) > Config.SYMMETRY_TOLERANCE * scale:
            return False, "kernel not symmetric"
        return True, None

    @staticmethod
    def validate_normalization(norm_squared: float) -> Tuple[bool, Optional[str]]:
        if abs(norm_squared - 1.0) > Config.NORMALIZATION_TOLERANCE:
            return False, f"wavefunction not normalized (norm^2 = {norm_squared!r})"
        return True, None

    @staticmethod
    def validate_decay(values: np.ndarray) -> Tuple[bool, Optional[str]]:
        peak = float(np.max(np.abs(values)))
        if peak == 0.0:
            return False, "wavefunction is identically zero"
        if abs(values[-1]) > Config.SAITO_DECAY * peak:
            return False, "wavefunction does not decay before the grid end"
        return True, None
