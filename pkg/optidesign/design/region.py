"""Box-shaped design regions."""

import itertools
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from ..errors import ArgumentError


@dataclass(frozen=True)
class DesignRegion:
    """Box bounds per design variable, in model units."""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper) or not lower:
            raise ArgumentError("region bounds must be non-empty and of equal length")
        if not all(np.isfinite(lower + upper)):
            raise ArgumentError("region bounds must be finite")
        if not all(lo < hi for lo, hi in zip(lower, upper)):
            raise ArgumentError(f"region needs lower < upper elementwise, got {lower} / {upper}")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def m(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def contains(self, x: Sequence[float]) -> bool:
        point = np.asarray(x, dtype=float)
        return bool(np.all(point >= self.lower) and np.all(point <= self.upper))

    def clamp(self, x: Sequence[float]) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def axes(self, points_per_dim: int) -> List[np.ndarray]:
        """Evenly spaced grid coordinates per variable, bounds included."""
        if points_per_dim < 2:
            raise ArgumentError("need at least 2 grid points per dimension")
        return [np.linspace(lo, hi, points_per_dim) for lo, hi in zip(self.lower, self.upper)]

    def interior_axes(self, points_per_dim: int) -> List[np.ndarray]:
        """Cell-centre coordinates: a grid offset from the boundary grid."""
        if points_per_dim < 1:
            raise ArgumentError("need at least 1 interior grid point per dimension")
        return [lo + (np.arange(points_per_dim) + 0.5) * (hi - lo) / points_per_dim
                for lo, hi in zip(self.lower, self.upper)]

    def corners(self) -> np.ndarray:
        """All 2**m corners, lexicographic."""
        return np.array(list(itertools.product(*zip(self.lower, self.upper))))

    def to_dict(self) -> Dict[str, Any]:
        return {'lower': list(self.lower), 'upper': list(self.upper)}

    @classmethod
    def parse(cls, text: str) -> 'DesignRegion':
        """Parse ``lo1:hi1,lo2:hi2,...``."""
        lower, upper = [], []
        for part in text.split(','):
            pieces = part.strip().split(':')
            if len(pieces) != 2:
                raise ArgumentError(f"region entry {part!r} must look like lo:hi")
            try:
                lower.append(float(pieces[0]))
                upper.append(float(pieces[1]))
            except ValueError as exc:
                raise ArgumentError(f"region entry {part!r} is not numeric") from exc
        return cls(tuple(lower), tuple(upper))
