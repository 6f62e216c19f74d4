"""Unconditional and conditional nonlinear least squares.

Both entry points share one Levenberg-Marquardt path (``_solve``); the
conditional fit hands it the co-parameter vector with theta_i held fixed.
"""

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.linalg import qr, solve_triangular
from scipy.optimize import least_squares

from .. import metrics
from ..errors import ArgumentError, ConvergenceError, ModelEvaluationError
from ..models import Dataset, ModelSpec, ParamPartition, build_jacobian, predict
from ..settings import EstimationSettings, SensitivitySettings

logger = structlog.get_logger(__name__)

_TRACE_LENGTH = 25
# relative rise in S still accepted from a polishing step
_SSE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class FitResult:
    """Least-squares estimates with their linear-approximation summary.

    ``covariance``, ``correlation`` and ``std_errors`` are None when V'V is
    singular at the solution. ``residuals`` is None for fits projected onto
    another design (see ``project_fit``).
    """
    theta_hat: np.ndarray
    residuals: Optional[np.ndarray]
    sse: float
    s2: float
    n_obs: int
    covariance: Optional[np.ndarray]
    correlation: Optional[np.ndarray]
    std_errors: Optional[np.ndarray]
    converged: bool
    iterations: int
    message: str = ""
    projected: bool = False

    @property
    def k(self) -> int:
        return self.theta_hat.size

    @property
    def dof(self) -> int:
        return self.n_obs - self.k

    @property
    def covariance_available(self) -> bool:
        return self.covariance is not None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            'estimates': self.theta_hat.tolist(),
            'std_errors': None if self.std_errors is None else self.std_errors.tolist(),
            'correlation': None,
            'sse': self.sse,
            's2': self.s2,
            'n': self.n_obs,
            'k': self.k,
            'converged': self.converged,
            'iterations': self.iterations,
        }
        if self.correlation is not None:
            data['correlation'] = [self.correlation[a, :a].tolist() for a in range(1, self.k)]
        if self.projected:
            data['projected'] = True
        return data


@dataclass(frozen=True, eq=False)
class ConditionalFit:
    """Minimum of S over the co-parameters with theta_i fixed (``i`` 0-based)."""
    i: int
    theta_i: float
    theta_minus: np.ndarray
    sse: float
    converged: bool = True
    iterations: int = 0
    error: Optional[str] = None

    def theta(self, k: int) -> np.ndarray:
        return ParamPartition(self.i, k).merge(self.theta_i, self.theta_minus)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'param': self.i + 1,
            'theta_i': self.theta_i,
            'theta_minus': self.theta_minus.tolist(),
            'sse': self.sse,
            'converged': self.converged,
            'error': self.error,
        }


@dataclass
class _Solution:
    x: np.ndarray
    sse: float
    nfev: int
    converged: bool
    message: str
    trace: List[Dict[str, Any]] = field(default_factory=list)


def _polish(residual: Callable[[np.ndarray], np.ndarray],
            jacobian: Callable[[np.ndarray], np.ndarray],
            x: np.ndarray, r: np.ndarray, steps: int,
            bound: Optional[float]) -> Tuple[np.ndarray, np.ndarray, float]:
    """Gauss-Newton steps from the LM solution; a step is kept unless S rises past roundoff.

    Returns the point, its residuals and |J'r| there.
    """
    sse = float(r @ r)
    J = jacobian(x)
    gradient = float(np.linalg.norm(J.T @ r))
    for _ in range(steps):
        if bound is not None and gradient <= bound:
            break
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        candidate = x + step
        try:
            r_new = residual(candidate)
            J_new = jacobian(candidate)
        except ModelEvaluationError:
            break
        sse_new = float(r_new @ r_new)
        if not sse_new <= sse + _SSE_SLACK * (1.0 + sse):
            break
        x, r, J, sse = candidate, r_new, J_new, sse_new
        gradient = float(np.linalg.norm(J.T @ r))
    return x, r, gradient


def _solve(residual: Callable[[np.ndarray], np.ndarray],
           jacobian: Callable[[np.ndarray], np.ndarray],
           x0: np.ndarray,
           settings: EstimationSettings,
           scale: Optional[float] = None) -> _Solution:
    """Levenberg-Marquardt, then Gauss-Newton polishing.

    With ``scale`` the solution only counts as converged once the normal
    equations hold: |V'e| <= normal_tolerance * scale.
    """
    trace: deque = deque(maxlen=_TRACE_LENGTH)

    def tracked(x):
        r = residual(x)
        trace.append({'theta': x.tolist(), 'sse': float(r @ r)})
        return r

    result = least_squares(
        tracked, x0, jac=jacobian, method='lm', x_scale='jac',
        ftol=settings.ftol, xtol=settings.xtol, gtol=settings.gtol,
        max_nfev=settings.max_iterations,
    )
    bound = None if scale is None else settings.normal_tolerance * scale
    x, r, gradient = _polish(tracked, jacobian, np.asarray(result.x, dtype=float),
                             np.asarray(result.fun, dtype=float), settings.polish_steps, bound)
    converged = result.status > 0
    message = str(result.message)
    if converged and bound is not None and not gradient <= bound:
        converged = False
        message = f"normal equations not satisfied: |V'e| = {gradient:.3g} > {bound:.3g}"
    return _Solution(
        x=x,
        sse=float(r @ r),
        nfev=int(result.nfev),
        converged=converged,
        message=message,
        trace=list(trace),
    )


def _require_fit_data(model: ModelSpec, dataset: Dataset) -> np.ndarray:
    y = dataset.require_response()
    if dataset.m != model.m:
        raise ArgumentError(f"dataset has {dataset.m} design variables, model {model.name!r} needs {model.m}")
    if dataset.n <= model.k:
        raise ArgumentError(f"need n > k for a least-squares fit (n={dataset.n}, k={model.k})")
    return y


def sum_of_squares(model: ModelSpec, dataset: Dataset, theta: Sequence[float]) -> float:
    """S(theta) = sum of squared residuals."""
    y = dataset.require_response()
    e = y - predict(model, dataset, theta)
    return float(e @ e)


def linear_covariance(V: np.ndarray, s2: float, singular_condition: Optional[float] = None,
                      ) -> Tuple[Optional[np.ndarray], Optional[np.ndarray], Optional[np.ndarray]]:
    """s2 (V'V)^-1 with its correlation matrix and standard errors.

    Returns three Nones when V'V is singular. Conditioning is judged on
    the column-scaled matrix, so parameter units do not matter; the
    threshold defaults to ``SensitivitySettings().singular_condition``.
    """
    if singular_condition is None:
        singular_condition = SensitivitySettings().singular_condition
    n, k = V.shape
    norms = np.linalg.norm(V, axis=0)
    if n < k or np.any(norms == 0.0):
        return None, None, None
    if np.linalg.cond(V / norms) ** 2 > singular_condition:
        return None, None, None
    R = qr(V, mode='r')[0][:k, :]
    R_inv = solve_triangular(R, np.eye(R.shape[0]))
    covariance = s2 * (R_inv @ R_inv.T)
    covariance = 0.5 * (covariance + covariance.T)
    std_errors = np.sqrt(np.diag(covariance))
    correlation = covariance / np.outer(std_errors, std_errors)
    correlation = np.clip(correlation, -1.0, 1.0)
    np.fill_diagonal(correlation, 1.0)
    return covariance, correlation, std_errors


def fit_ls(model: ModelSpec, dataset: Dataset, theta0: Sequence[float],
           settings: Optional[EstimationSettings] = None,
           sensitivity: Optional[SensitivitySettings] = None) -> FitResult:
    """Least-squares estimate of theta starting from ``theta0``.

    The fit converges only when the normal equations V'e = 0 hold to
    ``normal_tolerance * (1 + |y|)``; ``sensitivity`` supplies the
    condition number above which the covariance is withheld.
    """
    settings = settings or EstimationSettings()
    sensitivity = sensitivity or SensitivitySettings()
    y = _require_fit_data(model, dataset)
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (model.k,):
        raise ArgumentError(f"theta0 must have {model.k} entries, got shape {theta0.shape}")

    started = time.perf_counter()
    try:
        solution = _solve(
            lambda theta: y - predict(model, dataset, theta),
            lambda theta: -build_jacobian(model, dataset, theta),
            theta0, settings, scale=1.0 + float(np.linalg.norm(y)),
        )
    except ModelEvaluationError:
        metrics.fits_total.labels(outcome='evaluation_error').inc()
        raise
    finally:
        metrics.fit_duration.observe(time.perf_counter() - started)

    if not solution.converged:
        metrics.fits_total.labels(outcome='not_converged').inc()
        logger.warning("fit_not_converged", model=model.name, evaluations=solution.nfev,
                       sse=solution.sse)
        raise ConvergenceError(solution.message, solution.x, solution.sse,
                               solution.nfev, solution.trace)

    theta_hat = solution.x
    residuals = y - predict(model, dataset, theta_hat)
    sse = float(residuals @ residuals)
    s2 = sse / (dataset.n - model.k)
    covariance, correlation, std_errors = linear_covariance(
        build_jacobian(model, dataset, theta_hat), s2, sensitivity.singular_condition
    )
    if covariance is None:
        logger.warning("covariance_unavailable", model=model.name, theta=theta_hat.tolist())

    metrics.fits_total.labels(outcome='converged').inc()
    logger.debug("fit_converged", model=model.name, evaluations=solution.nfev, sse=sse)
    return FitResult(
        theta_hat=theta_hat,
        residuals=residuals,
        sse=sse,
        s2=s2,
        n_obs=dataset.n,
        covariance=covariance,
        correlation=correlation,
        std_errors=std_errors,
        converged=True,
        iterations=solution.nfev,
        message=solution.message,
    )


def fit_conditional(model: ModelSpec, dataset: Dataset, i: int, theta_i: float,
                    start: Sequence[float],
                    settings: Optional[EstimationSettings] = None) -> ConditionalFit:
    """Conditional estimate of the co-parameters with theta_i held at ``theta_i``."""
    settings = settings or EstimationSettings()
    y = _require_fit_data(model, dataset)
    partition = ParamPartition(i, model.k)
    start = np.asarray(start, dtype=float).reshape(-1)
    if start.shape != (model.k - 1,):
        raise ArgumentError(f"conditional start must have {model.k - 1} entries, got {start.shape}")
    theta_i = float(theta_i)

    if model.k == 1:
        sse = sum_of_squares(model, dataset, [theta_i])
        return ConditionalFit(i=i, theta_i=theta_i, theta_minus=np.empty(0), sse=sse)

    others = list(partition.others)
    solution = _solve(
        lambda tm: y - predict(model, dataset, partition.merge(theta_i, tm)),
        lambda tm: -build_jacobian(model, dataset, partition.merge(theta_i, tm))[:, others],
        start, settings,
    )
    if not solution.converged:
        raise ConvergenceError(solution.message, partition.merge(theta_i, solution.x),
                               solution.sse, solution.nfev, solution.trace)
    return ConditionalFit(i=i, theta_i=theta_i, theta_minus=solution.x,
                          sse=solution.sse, iterations=solution.nfev)


def project_fit(model: ModelSpec, fit: FitResult, design: Dataset,
                sensitivity: Optional[SensitivitySettings] = None) -> FitResult:
    """Linear-approximation summary of ``design`` at a shared estimate and s2.

    Used to compare confidence regions of alternative designs that are
    assumed to yield the same estimates and residual variance.
    """
    if design.m != model.m:
        raise ArgumentError(f"design has {design.m} design variables, model {model.name!r} needs {model.m}")
    V = build_jacobian(model, design, fit.theta_hat)
    sensitivity = sensitivity or SensitivitySettings()
    covariance, correlation, std_errors = linear_covariance(V, fit.s2, sensitivity.singular_condition)
    return FitResult(
        theta_hat=fit.theta_hat.copy(),
        residuals=None,
        sse=fit.sse,
        s2=fit.s2,
        n_obs=design.n,
        covariance=covariance,
        correlation=correlation,
        std_errors=std_errors,
        converged=fit.converged,
        iterations=0,
        message="projected",
        projected=True,
    )
