"""Profile traces, sum-of-squares grids and linear-approximation ellipses."""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import structlog
from scipy import special, stats

from ..errors import (
    ArgumentError,
    ConvergenceError,
    CovarianceUnavailableError,
    ModelEvaluationError,
    UnsupportedOperationError,
)
from ..models import Dataset, ModelSpec
from ..settings import EstimationSettings
from .fitting import ConditionalFit, FitResult, fit_conditional, sum_of_squares

logger = structlog.get_logger(__name__)


class GridMode(Enum):
    UNCONDITIONAL_PAIRS = "unconditional-pairs"
    CONDITIONAL_TRACE = "conditional-trace"


def profile_trace(model: ModelSpec, dataset: Dataset, i: int, grid: Sequence[float],
                  start: Sequence[float],
                  settings: Optional[EstimationSettings] = None) -> List[ConditionalFit]:
    """Conditional fits along ``grid`` for parameter ``i``.

    Each solve warm-starts from the previous successful one. A failed grid
    point is recorded with ``converged=False`` and does not stop the trace.
    """
    current = np.asarray(start, dtype=float)
    trace: List[ConditionalFit] = []
    for value in np.asarray(grid, dtype=float):
        try:
            cond = fit_conditional(model, dataset, i, value, current, settings)
        except (ConvergenceError, ModelEvaluationError) as exc:
            logger.info("profile_point_failed", model=model.name, param=i + 1,
                        theta_i=float(value), error=str(exc))
            trace.append(ConditionalFit(
                i=i, theta_i=float(value),
                theta_minus=np.full(model.k - 1, np.nan), sse=float('nan'),
                converged=False, error=str(exc),
            ))
            continue
        trace.append(cond)
        current = cond.theta_minus
    return trace


def likelihood_level(sse: float, n: int, p: int = 2, level: float = 0.90) -> float:
    """S(theta_hat) (1 + p/(n-p) F_level(p, n-p))."""
    if not 0.0 < level < 1.0:
        raise ArgumentError(f"level must lie in (0, 1), got {level}")
    if n <= p:
        raise ArgumentError(f"need n > p (n={n}, p={p})")
    return float(sse * (1.0 + p / (n - p) * stats.f.ppf(level, p, n - p)))


@dataclass(frozen=True, eq=False)
class SSEGrid:
    """S over a two-parameter grid; cell (a, b) pairs grid1[a] with grid2[b]."""
    grid1: np.ndarray
    grid2: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    sse: np.ndarray
    mode: GridMode

    def minimum(self):
        a, b = np.unravel_index(np.nanargmin(self.sse), self.sse.shape)
        return int(a), int(b), float(self.sse[a, b])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'theta1': self.theta1.reshape(-1),
            'theta2': self.theta2.reshape(-1),
            'sse': self.sse.reshape(-1),
        })

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


def _safe_sse(model: ModelSpec, dataset: Dataset, theta) -> float:
    try:
        return sum_of_squares(model, dataset, theta)
    except ModelEvaluationError:
        return float('nan')


def sse_grid(model: ModelSpec, dataset: Dataset, grid1: Sequence[float], grid2: Sequence[float],
             mode: GridMode = GridMode.UNCONDITIONAL_PAIRS,
             start: Optional[Sequence[float]] = None,
             settings: Optional[EstimationSettings] = None) -> SSEGrid:
    """Sum of squares over a grid in (theta1, theta2).

    In conditional-trace mode cell (a, b) is evaluated at
    (theta1~(grid2[b]), theta2~(grid1[a])), the conditional estimates of each
    parameter given the other's grid value; ``start`` seeds both traces.
    Cells where the model cannot be evaluated hold NaN.
    """
    if model.k != 2:
        raise UnsupportedOperationError(f"sse_grid needs a two-parameter model, {model.name!r} has k={model.k}")
    dataset.require_response()
    mode = GridMode(mode)
    g1 = np.asarray(grid1, dtype=float)
    g2 = np.asarray(grid2, dtype=float)

    if mode is GridMode.UNCONDITIONAL_PAIRS:
        theta1, theta2 = np.meshgrid(g1, g2, indexing='ij')
    else:
        if start is None:
            raise ArgumentError("conditional-trace mode needs a starting theta")
        start = np.asarray(start, dtype=float)
        # theta1 given theta2 (i=1 fixed), theta2 given theta1 (i=0 fixed)
        theta1_given_2 = np.array([c.theta_minus[0] for c in
                                   profile_trace(model, dataset, 1, g2, start[[0]], settings)])
        theta2_given_1 = np.array([c.theta_minus[0] for c in
                                   profile_trace(model, dataset, 0, g1, start[[1]], settings)])
        theta1 = np.tile(theta1_given_2, (g1.size, 1))
        theta2 = np.tile(theta2_given_1[:, None], (1, g2.size))

    sse = np.empty(theta1.shape)
    for a in range(theta1.shape[0]):
        for b in range(theta1.shape[1]):
            point = (theta1[a, b], theta2[a, b])
            sse[a, b] = _safe_sse(model, dataset, point) if np.all(np.isfinite(point)) else np.nan
    logger.debug("sse_grid", model=model.name, mode=mode.value, cells=int(sse.size))
    return SSEGrid(grid1=g1, grid2=g2, theta1=theta1, theta2=theta2, sse=sse, mode=mode)


@dataclass(frozen=True, eq=False)
class EllipseDescriptor:
    """{theta: (theta-c)' cov^-1 (theta-c) <= radius2}.

    ``axes`` holds unit direction vectors as columns, ordered by decreasing
    ``semi_axes``. ``orientation`` is the major-axis angle in radians (k=2).
    """
    center: np.ndarray
    semi_axes: np.ndarray
    axes: np.ndarray
    radius2: float
    level: float
    orientation: Optional[float] = None

    @property
    def k(self) -> int:
        return self.center.size

    @property
    def volume(self) -> float:
        unit_ball = np.pi ** (self.k / 2.0) / special.gamma(self.k / 2.0 + 1.0)
        return float(unit_ball * np.prod(self.semi_axes))

    @property
    def area(self) -> float:
        if self.k != 2:
            raise UnsupportedOperationError("area is defined for two-parameter ellipses")
        return self.volume

    def contains(self, theta: Sequence[float]) -> bool:
        offset = self.axes.T @ (np.asarray(theta, dtype=float) - self.center)
        return bool(np.sum((offset / self.semi_axes) ** 2) <= 1.0)

    def boundary(self, n_points: int = 200) -> np.ndarray:
        if self.k != 2:
            raise UnsupportedOperationError("boundary is defined for two-parameter ellipses")
        t = np.linspace(0.0, 2.0 * np.pi, n_points)
        circle = np.vstack([np.cos(t), np.sin(t)])
        return (self.center[:, None] + self.axes @ (self.semi_axes[:, None] * circle)).T

    def to_dict(self) -> Dict[str, Any]:
        return {
            'center': self.center.tolist(),
            'semi_axes': self.semi_axes.tolist(),
            'axes': self.axes.T.tolist(),
            'orientation': self.orientation,
            'radius2': self.radius2,
            'level': self.level,
            'volume': self.volume,
        }


def confidence_ellipse(fit: FitResult, level: float = 0.95) -> EllipseDescriptor:
    """Linear-approximation joint confidence region of ``fit``."""
    if not 0.0 < level < 1.0:
        raise ArgumentError(f"level must lie in (0, 1), got {level}")
    if fit.covariance is None:
        raise CovarianceUnavailableError("fit has no covariance matrix (singular V'V)")
    if fit.dof < 1:
        raise ArgumentError(f"need n > k for an F-based region (n={fit.n_obs}, k={fit.k})")

    eigenvalues, vectors = np.linalg.eigh(fit.covariance)
    if eigenvalues.min() <= 0.0:
        raise CovarianceUnavailableError("covariance matrix is singular")
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues, vectors = eigenvalues[order], vectors[:, order]

    radius2 = float(fit.k * stats.f.ppf(level, fit.k, fit.dof))
    orientation = None
    if fit.k == 2:
        orientation = float(np.arctan2(vectors[1, 0], vectors[0, 0]))
    return EllipseDescriptor(
        center=fit.theta_hat.copy(),
        semi_axes=np.sqrt(eigenvalues * radius2),
        axes=vectors,
        radius2=radius2,
        level=level,
        orientation=orientation,
    )
