"""Initial and sequential D / D_P designs, and D-efficiency between designs."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import structlog

from ..errors import ArgumentError, ModelEvaluationError, SingularityError
from ..estimation import FitResult
from ..models import (
    Dataset,
    ModelSpec,
    build_jacobian,
    build_second_derivatives,
    eval_hessian_point,
    eval_jacobian_row,
    predict,
)
from ..sensitivity import ResidualMode, assemble_profile_matrix
from ..settings import Settings
from .criteria import (
    CriterionKind,
    CriterionValue,
    EfficiencyMode,
    EfficiencyReport,
    augment,
    d_criterion,
    d_efficiency,
    dp_criterion,
)
from .region import DesignRegion
from .search import SearchTrace, grid_local_maxima, refine_starts, score, search_design

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class DesignOutcome:
    """Optimal support points and how they were found."""
    support_points: np.ndarray
    criterion: CriterionValue
    criterion_kind: CriterionKind
    search_trace: SearchTrace
    kind: str
    eval_point: np.ndarray
    residual_mode: ResidualMode
    replications: int = 1
    efficiency: List[EfficiencyReport] = field(default_factory=list)
    selection: str = 'global'
    global_points: Optional[np.ndarray] = None
    global_criterion: Optional[CriterionValue] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'criterion_kind': self.criterion_kind.label,
            'support_points': self.support_points.tolist(),
            'replications': self.replications,
            'criterion': self.criterion.to_dict(),
            'eval_point': self.eval_point.tolist(),
            'residual_mode': self.residual_mode.value,
            'efficiency': [report.to_dict() for report in self.efficiency],
            'search_trace': self.search_trace.to_dict(),
            'selection': self.selection,
            'global_points': None if self.global_points is None else self.global_points.tolist(),
            'global_criterion': None if self.global_criterion is None else self.global_criterion.to_dict(),
        }


def _sorted_points(points: np.ndarray) -> np.ndarray:
    order = np.lexsort(points.T[::-1])
    return points[order]


def _evaluate(kind: CriterionKind, V: np.ndarray, W: Optional[np.ndarray],
              e: Optional[np.ndarray], settings: Settings) -> CriterionValue:
    if kind is CriterionKind.D:
        return d_criterion(V)
    P, _ = assemble_profile_matrix(V, W, e, settings.sensitivity)
    return dp_criterion(P)


def _singular(kind: CriterionKind, k: int) -> CriterionValue:
    return CriterionValue(float('-inf'), kind, k)


def design_criterion(model: ModelSpec, design: Dataset, theta: Sequence[float],
                     kind: CriterionKind, residuals: Optional[Sequence[float]] = None,
                     settings: Optional[Settings] = None) -> CriterionValue:
    """D or D_P of ``design`` at ``theta``; residuals default to zero.

    Designs whose profile blocks are singular, or where the model cannot be
    evaluated, score -inf.
    """
    settings = settings or Settings()
    kind = CriterionKind(kind)
    e = np.zeros(design.n) if residuals is None else np.asarray(residuals, dtype=float)
    if design.n < model.k:
        return _singular(kind, model.k)
    try:
        V = build_jacobian(model, design, theta)
        W = build_second_derivatives(model, design, theta) if kind is CriterionKind.DP else None
        return _evaluate(kind, V, W, e, settings)
    except (SingularityError, ModelEvaluationError) as exc:
        logger.debug("candidate_singular", model=model.name, error=str(exc))
        return _singular(kind, model.k)


def design_initial(model: ModelSpec, theta0: Sequence[float], n_support: int,
                   region: DesignRegion, criterion_kind: CriterionKind,
                   points_per_dim: Optional[int] = None, replications: int = 1,
                   settings: Optional[Settings] = None) -> DesignOutcome:
    """Joint search over ``n_support`` distinct points, zero residuals at ``theta0``.

    The search runs on the unreplicated support; the reported criterion is
    that of the support replicated ``replications`` times.
    """
    settings = settings or Settings()
    kind = CriterionKind(criterion_kind)
    theta0 = np.asarray(theta0, dtype=float)
    if region.m != model.m:
        raise ArgumentError(f"region has {region.m} variables, model {model.name!r} has m={model.m}")
    if n_support < 1 or replications < 1:
        raise ArgumentError("n_support and replications must be >= 1")
    if n_support < model.k:
        logger.warning("design_underdetermined", n_support=n_support, k=model.k)

    def objective(points: np.ndarray) -> CriterionValue:
        return design_criterion(model, Dataset(points), theta0, kind, settings=settings)

    trace = search_design(objective, region, n_support, points_per_dim, settings.design)
    support = _sorted_points(trace.points)
    criterion = design_criterion(model, Dataset(support).replicated(replications), theta0, kind,
                                 settings=settings)
    logger.info("design_initial", model=model.name, criterion=kind.label,
                support=support.tolist(), logdet=criterion.logdet)
    return DesignOutcome(support_points=support, criterion=criterion, criterion_kind=kind,
                         search_trace=trace, kind='initial', eval_point=theta0.copy(),
                         residual_mode=ResidualMode.ZERO, replications=replications)


def _existing_residuals(model: ModelSpec, dataset: Dataset, theta: np.ndarray,
                        residual_mode: ResidualMode) -> np.ndarray:
    if residual_mode is ResidualMode.OBSERVED:
        return dataset.require_response() - predict(model, dataset, theta)
    return np.zeros(dataset.n)


def _repeats_run(points: np.ndarray, dataset: Dataset, region: DesignRegion, tolerance: float) -> bool:
    """True when any point lies within ``tolerance`` region widths of an existing run on every axis."""
    limit = tolerance * region.widths
    for x in np.atleast_2d(points):
        if np.any(np.all(np.abs(dataset.X - x) <= limit, axis=1)):
            return True
    return False


def _local_starts(objective, dataset: Dataset, region: DesignRegion,
                  points_per_dim: Optional[int], candidates: Optional[Sequence[Sequence[float]]],
                  settings: Settings) -> List[np.ndarray]:
    """Best-first starts that do not repeat a run: the candidates, or the grid's local maxima."""
    tolerance = settings.design.replicate_tolerance
    if candidates is not None:
        ranked = sorted(((score(objective(np.atleast_2d(np.asarray(c, dtype=float)))), index, c)
                         for index, c in enumerate(candidates)), key=lambda t: (-t[0], t[1]))
        starts = [np.atleast_2d(np.asarray(c, dtype=float)) for value, _, c in ranked if np.isfinite(value)]
    else:
        peaks = grid_local_maxima(objective, region, points_per_dim or settings.design.grid_points,
                                  max_evaluations=settings.design.max_grid_evaluations,
                                  workers=settings.design.workers)
        starts = [peak.points for peak in peaks]
    starts = [s for s in starts if not _repeats_run(s, dataset, region, tolerance)]
    return starts[:settings.design.max_local_starts]


def design_sequential(model: ModelSpec, fit: FitResult, dataset: Dataset, region: DesignRegion,
                      criterion_kind: CriterionKind, theta: Optional[Sequence[float]] = None,
                      residual_mode: ResidualMode = ResidualMode.OBSERVED,
                      points_per_dim: Optional[int] = None,
                      candidates: Optional[Sequence[Sequence[float]]] = None,
                      recheck: bool = True, settings: Optional[Settings] = None,
                      avoid_replicates: Optional[bool] = None) -> DesignOutcome:
    """Best single point to add to ``dataset``.

    Sensitivities are evaluated at the fit estimate unless ``theta`` is given.
    For D_P the existing rows carry their residuals (observed or zero) and the
    candidate row carries 0. ``candidates`` replaces the grid stage with an
    explicit list of points.

    When the global optimum repeats an existing run and ``avoid_replicates``
    is on, the best refined local optimum that does not is selected instead;
    the global point stays on the outcome for comparison.
    """
    settings = settings or Settings()
    kind = CriterionKind(criterion_kind)
    residual_mode = ResidualMode(residual_mode)
    if avoid_replicates is None:
        avoid_replicates = settings.design.avoid_replicates
    if not fit.converged:
        raise ArgumentError("sequential design needs a converged fit")
    if region.m != model.m or dataset.m != model.m:
        raise ArgumentError(f"region/dataset dimensions do not match model {model.name!r}")
    theta_eval = fit.theta_hat.copy() if theta is None else np.asarray(theta, dtype=float)

    V_n = build_jacobian(model, dataset, theta_eval)
    W_n = build_second_derivatives(model, dataset, theta_eval) if kind is CriterionKind.DP else None
    e_n = _existing_residuals(model, dataset, theta_eval, residual_mode)
    e = np.append(e_n, 0.0)

    def objective(points: np.ndarray) -> CriterionValue:
        x = points[0]
        try:
            V = augment(V_n, eval_jacobian_row(model, x, theta_eval))
            W = None
            if kind is CriterionKind.DP:
                W = np.concatenate([W_n, eval_hessian_point(model, x, theta_eval)[None]], axis=0)
            return _evaluate(kind, V, W, e, settings)
        except (SingularityError, ModelEvaluationError):
            return _singular(kind, model.k)

    trace = search_design(objective, region, 1, points_per_dim, settings.design,
                          candidates=candidates, recheck=recheck)
    points = trace.points.copy()
    criterion = objective(points)
    selection, global_points, global_criterion = 'global', None, None
    tolerance = settings.design.replicate_tolerance
    if avoid_replicates and _repeats_run(points, dataset, region, tolerance):
        starts = _local_starts(objective, dataset, region, points_per_dim, candidates, settings)
        local = refine_starts(objective, region, starts,
                              lambda p: not _repeats_run(p, dataset, region, tolerance), settings.design)
        if local is None:
            logger.warning("replicate_kept", point=points[0].tolist(), starts=len(starts))
        else:
            global_points, global_criterion = points, criterion
            points, criterion, selection = local.points.copy(), objective(local.points), 'local'
            logger.info("replicate_avoided", global_point=global_points[0].tolist(),
                        global_logdet=global_criterion.logdet, point=points[0].tolist(),
                        logdet=criterion.logdet)
    logger.info("design_sequential", model=model.name, criterion=kind.label,
                point=points[0].tolist(), logdet=criterion.logdet,
                residual_mode=residual_mode.value, selection=selection)
    return DesignOutcome(support_points=points, criterion=criterion,
                         criterion_kind=kind, search_trace=trace, kind='sequential',
                         eval_point=theta_eval, residual_mode=residual_mode, selection=selection,
                         global_points=global_points, global_criterion=global_criterion)


def design_efficiency(model: ModelSpec, theta: Sequence[float], d_design: Sequence,
                      dp_design: Sequence, base: Optional[Dataset] = None,
                      residuals: Optional[Sequence[float]] = None,
                      settings: Optional[Settings] = None) -> Dict[EfficiencyMode, EfficiencyReport]:
    """D-efficiency of a D design against a D_P design, in both modes.

    literal: log|V'V| at the D design over log|P'P| at the D_P design.
    same-matrix: log|V'V| at the D_P design over log|V'V| at the D design,
    i.e. how much D-information the D_P design keeps.
    With ``base`` the designs are single points appended to it; ``residuals``
    are those of the base rows (the appended row gets 0).
    """
    settings = settings or Settings()
    theta = np.asarray(theta, dtype=float)
    d_points = np.atleast_2d(np.asarray(d_design, dtype=float))
    dp_points = np.atleast_2d(np.asarray(dp_design, dtype=float))
    e_dp = None
    if base is not None:
        d_set = Dataset(np.vstack([base.X, d_points]))
        dp_set = Dataset(np.vstack([base.X, dp_points]))
        if residuals is not None:
            e_dp = np.concatenate([np.asarray(residuals, dtype=float), np.zeros(dp_points.shape[0])])
    else:
        d_set, dp_set = Dataset(d_points), Dataset(dp_points)

    d_at_d = design_criterion(model, d_set, theta, CriterionKind.D, settings=settings)
    d_at_dp = design_criterion(model, dp_set, theta, CriterionKind.D, settings=settings)
    dp_at_dp = design_criterion(model, dp_set, theta, CriterionKind.DP, residuals=e_dp, settings=settings)
    k = model.k
    return {
        EfficiencyMode.LITERAL: d_efficiency(d_at_d.logdet, dp_at_dp.logdet, k, EfficiencyMode.LITERAL),
        EfficiencyMode.SAME_MATRIX: d_efficiency(d_at_dp.logdet, d_at_d.logdet, k,
                                                 EfficiencyMode.SAME_MATRIX),
    }
