"""Grid search, box-constrained simplex refinement and the interior re-check.

Objectives map an (n_support x m) array of design points to a score to be
maximized: either a float or a ``CriterionValue`` (its log-determinant is
used). Non-finite scores count as -inf.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from scipy import ndimage
from scipy.optimize import minimize

from ..errors import ArgumentError
from ..settings import DesignSettings
from .criteria import CriterionValue
from .region import DesignRegion

logger = structlog.get_logger(__name__)

Objective = Callable[[np.ndarray], Union[float, CriterionValue]]

# stands in for -logdet of a singular candidate inside the simplex
_INFEASIBLE = 1e300


def score(value: Union[float, CriterionValue]) -> float:
    raw = value.logdet if isinstance(value, CriterionValue) else float(value)
    return raw if not np.isnan(raw) else float('-inf')


@dataclass(frozen=True, eq=False)
class CandidateResult:
    """Best candidate of an exhaustive search; ties go to the earliest."""
    points: np.ndarray
    value: float
    n_evaluated: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'points': self.points.tolist(),
            'value': self.value if np.isfinite(self.value) else None,
            'n_evaluated': self.n_evaluated,
        }


@dataclass(frozen=True, eq=False)
class OptimizerResult:
    points: np.ndarray
    value: float
    start_value: float
    converged: bool
    iterations: int
    n_evaluations: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'start_value': self.start_value if np.isfinite(self.start_value) else None,
            'value': self.value if np.isfinite(self.value) else None,
            'points': self.points.tolist(),
            'converged': self.converged,
            'iterations': self.iterations,
            'evaluations': self.n_evaluations,
        }


@dataclass(frozen=True, eq=False)
class RecheckResult:
    confirmed: bool
    points: np.ndarray
    value: float
    grid_best_value: float
    restarted: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'confirmed': self.confirmed,
            'restarted': self.restarted,
            'grid_best_value': self.grid_best_value if np.isfinite(self.grid_best_value) else None,
            'value': self.value if np.isfinite(self.value) else None,
            'points': self.points.tolist(),
        }


def _as_design(points, m: Optional[int] = None) -> np.ndarray:
    design = np.atleast_2d(np.asarray(points, dtype=float))
    if m is not None and design.shape[1] != m:
        design = design.reshape(-1, m)
    return design


def _scores(objective: Objective, designs: List[np.ndarray], workers: int) -> List[float]:
    def evaluate(design):
        return score(objective(design))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(evaluate, designs))
    return [evaluate(design) for design in designs]


def candidate_search(objective: Objective, candidates: Iterable, workers: int = 1) -> CandidateResult:
    """Evaluate every candidate design; keep the first strict maximum."""
    designs = [_as_design(c) for c in candidates]
    if not designs:
        raise ArgumentError("no candidates to evaluate")
    values = _scores(objective, designs, workers)

    best = 0
    for index, value in enumerate(values):
        if value > values[best]:
            best = index
    return CandidateResult(points=designs[best], value=values[best], n_evaluated=len(designs))


def _grid_candidates(axes: Sequence[np.ndarray], n_support: int) -> Tuple[Iterable, int]:
    n_points = math.prod(len(axis) for axis in axes)
    points = itertools.product(*axes)
    if n_support == 1:
        return ([p] for p in points), n_points
    return itertools.combinations(points, n_support), math.comb(n_points, n_support)


def grid_search(objective: Objective, region: DesignRegion, points_per_dim: int,
                n_support: int = 1, max_evaluations: int = DesignSettings().max_grid_evaluations,
                workers: int = 1, interior: bool = False) -> CandidateResult:
    """Exhaustive search over the Cartesian grid of ``region``.

    With ``n_support > 1`` the candidates are sets of distinct grid points
    (lexicographic combinations), so a design and its permutations are one
    candidate. ``interior`` switches to cell-centre coordinates.
    """
    if n_support < 1:
        raise ArgumentError("n_support must be >= 1")
    axes = region.interior_axes(points_per_dim) if interior else region.axes(points_per_dim)
    candidates, count = _grid_candidates(axes, n_support)
    if count > max_evaluations:
        raise ArgumentError(
            f"grid of {count} candidates exceeds the limit of {max_evaluations}; "
            "lower the grid resolution"
        )
    logger.debug("grid_search", candidates=count, n_support=n_support, interior=interior)
    return candidate_search(objective, candidates, workers=workers)


def grid_local_maxima(objective: Objective, region: DesignRegion, points_per_dim: int,
                      max_evaluations: int = DesignSettings().max_grid_evaluations,
                      workers: int = 1) -> List[CandidateResult]:
    """Single-point grid nodes that no neighbour beats, best first.

    Neighbours are the up to 3^m - 1 adjacent nodes; non-finite scores are
    never peaks.
    """
    axes = region.axes(points_per_dim)
    shape = tuple(len(axis) for axis in axes)
    count = math.prod(shape)
    if count > max_evaluations:
        raise ArgumentError(
            f"grid of {count} candidates exceeds the limit of {max_evaluations}; "
            "lower the grid resolution"
        )
    designs = [_as_design(point) for point in itertools.product(*axes)]
    values = np.asarray(_scores(objective, designs, workers), dtype=float)
    surface = values.reshape(shape)
    peaks = np.isfinite(surface) & (surface == ndimage.maximum_filter(surface, size=3, mode='nearest'))
    indices = np.flatnonzero(peaks.ravel())
    indices = indices[np.argsort(-values[indices], kind='stable')]
    logger.debug("grid_local_maxima", candidates=count, peaks=len(indices))
    return [CandidateResult(points=designs[i], value=float(values[i]), n_evaluated=count) for i in indices]


def _initial_simplex(x0: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    step = 0.05 * (upper - lower)
    simplex = np.tile(x0, (x0.size + 1, 1))
    for a in range(x0.size):
        direction = step[a] if x0[a] + step[a] <= upper[a] else -step[a]
        simplex[a + 1, a] += direction
    return simplex


def optimize_design(objective: Objective, start, region: DesignRegion,
                    settings: Optional[DesignSettings] = None) -> OptimizerResult:
    """Nelder-Mead on -score with clamping and a quadratic out-of-bounds penalty.

    Stops when the simplex diameter is below tolerance * (1 + |start|) or
    after the iteration cap; the best point seen is returned either way.
    """
    settings = settings or DesignSettings()
    start_design = _as_design(start, region.m)
    shape = start_design.shape
    if not all(region.contains(point) for point in start_design):
        raise ArgumentError(f"start {start_design.tolist()} lies outside the region")

    n_support = shape[0]
    lower = np.tile(region.lower, n_support)
    upper = np.tile(region.upper, n_support)
    width = upper - lower
    x0 = start_design.reshape(-1)

    def penalized(z):
        clamped = np.clip(z, lower, upper)
        value = score(objective(clamped.reshape(shape)))
        if not np.isfinite(value):
            return _INFEASIBLE
        excess = (z - clamped) / width
        return -value + settings.penalty_weight * float(excess @ excess)

    start_value = score(objective(start_design))
    result = minimize(
        penalized, x0, method='Nelder-Mead',
        options={
            'initial_simplex': _initial_simplex(x0, lower, upper),
            'xatol': settings.simplex_tolerance * (1.0 + float(np.linalg.norm(x0))),
            'fatol': np.inf,
            'maxiter': settings.simplex_max_iterations,
            'adaptive': False,
        },
    )
    best = np.clip(result.x, lower, upper).reshape(shape)
    value = score(objective(best))
    if not value >= start_value:
        best, value = start_design, start_value
    if not result.success:
        logger.info("simplex_not_converged", iterations=int(result.nit), message=result.message)
    return OptimizerResult(points=best, value=value, start_value=start_value,
                           converged=bool(result.success), iterations=int(result.nit),
                           n_evaluations=int(result.nfev))


def refine_starts(objective: Objective, region: DesignRegion, starts: Iterable,
                  accept: Callable[[np.ndarray], bool],
                  settings: Optional[DesignSettings] = None) -> Optional[OptimizerResult]:
    """Simplex from each start; the best refined design that ``accept`` allows.

    Ties go to the earlier start. None when every refinement is rejected.
    """
    settings = settings or DesignSettings()
    best: Optional[OptimizerResult] = None
    for start in starts:
        design = _as_design(start, region.m)
        design = np.array([region.clamp(point) for point in design])
        refined = optimize_design(objective, design, region, settings)
        if not accept(refined.points):
            logger.debug("refinement_rejected", start=design.tolist(), points=refined.points.tolist())
            continue
        if best is None or refined.value > best.value:
            best = refined
    return best


def interior_recheck(objective: Objective, region: DesignRegion, optimum: OptimizerResult,
                     points_per_dim: int, settings: Optional[DesignSettings] = None) -> RecheckResult:
    """Re-grid the interior; restart the simplex if it finds a clearly better point."""
    settings = settings or DesignSettings()
    n_support = optimum.points.shape[0]
    grid = grid_search(objective, region, points_per_dim, n_support=n_support,
                       max_evaluations=settings.max_grid_evaluations,
                       workers=settings.workers, interior=True)
    margin = settings.recheck_threshold * max(1.0, abs(optimum.value)) if np.isfinite(optimum.value) else 0.0
    if not grid.value > optimum.value + margin:
        return RecheckResult(confirmed=True, points=optimum.points, value=optimum.value,
                             grid_best_value=grid.value, restarted=False)

    logger.info("recheck_improvement", optimizer_value=optimum.value, grid_value=grid.value)
    restarted = optimize_design(objective, grid.points, region, settings)
    return RecheckResult(confirmed=False, points=restarted.points, value=restarted.value,
                         grid_best_value=grid.value, restarted=True)


@dataclass(frozen=True, eq=False)
class SearchTrace:
    """Grid stage, simplex refinement and (optional) interior re-check."""
    grid: CandidateResult
    optimizer: OptimizerResult
    recheck: Optional[RecheckResult]
    points_per_dim: int

    @property
    def points(self) -> np.ndarray:
        return self.recheck.points if self.recheck is not None else self.optimizer.points

    @property
    def value(self) -> float:
        return self.recheck.value if self.recheck is not None else self.optimizer.value

    def to_dict(self) -> Dict[str, Any]:
        return {
            'points_per_dim': self.points_per_dim,
            'grid_best': self.grid.to_dict(),
            'optimizer': self.optimizer.to_dict(),
            'recheck': self.recheck.to_dict() if self.recheck is not None else None,
        }


def search_design(objective: Objective, region: DesignRegion, n_support: int = 1,
                  points_per_dim: Optional[int] = None, settings: Optional[DesignSettings] = None,
                  candidates: Optional[Iterable] = None, recheck: bool = True) -> SearchTrace:
    """Grid (or explicit candidates), then simplex from the best, then re-check."""
    settings = settings or DesignSettings()
    points_per_dim = points_per_dim or settings.grid_points
    if candidates is not None:
        best = candidate_search(objective, candidates, workers=settings.workers)
    else:
        best = grid_search(objective, region, points_per_dim, n_support=n_support,
                           max_evaluations=settings.max_grid_evaluations,
                           workers=settings.workers)
    if not np.isfinite(best.value):
        logger.warning("grid_all_singular", n_evaluated=best.n_evaluated)
    start = np.array([region.clamp(point) for point in best.points])
    optimum = optimize_design(objective, start, region, settings)
    checked = interior_recheck(objective, region, optimum, points_per_dim, settings) if recheck else None
    return SearchTrace(grid=best, optimizer=optimum, recheck=checked, points_per_dim=points_per_dim)
