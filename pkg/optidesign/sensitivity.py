"""Local and profile-based sensitivity coefficients.

The profile-based coefficient p_i is the total derivative of the predicted
response in theta_i along the conditional least-squares path of the other
parameters:

    p_i = v_i - V_{-i} H^{-1} h,
    H = V_{-i}'V_{-i} - [e'][W_{-i,-i}],   h = V_{-i}'v_i - [e'][W_{-i,i}]

With zero residuals it reduces to the residual of regressing v_i on V_{-i}.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy import linalg

from .errors import ArgumentError, SingularityError
from .models import Dataset, ModelSpec, build_jacobian, build_second_derivatives, predict
from .settings import SensitivitySettings

logger = structlog.get_logger(__name__)


class ResidualMode(Enum):
    OBSERVED = "observed"
    ZERO = "zero"


def _check_arrays(V: np.ndarray, W: Optional[np.ndarray], e: Optional[np.ndarray]) -> None:
    if V.ndim != 2:
        raise ArgumentError(f"V must be n x k, got shape {V.shape}")
    n, k = V.shape
    if W is not None and W.shape != (n, k, k):
        raise ArgumentError(f"W must be {n} x {k} x {k}, got shape {W.shape}")
    if e is not None and e.shape != (n,):
        raise ArgumentError(f"e must have {n} entries, got shape {e.shape}")


def bracket_contract(e: Sequence[float], W: np.ndarray,
                     rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    """[e'][W]: entry (a, b) = sum_j e_j W[j, rows[a], cols[b]]."""
    e = np.asarray(e, dtype=float)
    W = np.asarray(W, dtype=float)
    if W.ndim != 3 or W.shape[0] != e.size:
        raise ArgumentError(f"W must be n x k x k with n = {e.size}, got shape {W.shape}")
    block = W[:, list(rows), :][:, :, list(cols)]
    return np.einsum('j,jab->ab', e, block)


def _others(i: int, k: int) -> List[int]:
    if not 0 <= i < k:
        raise ArgumentError(f"parameter index {i} outside 0..{k - 1}")
    return [a for a in range(k) if a != i]


def conditional_blocks(i: int, V: np.ndarray, W: np.ndarray,
                       e: np.ndarray) -> Tuple[List[int], np.ndarray, np.ndarray]:
    """Co-parameter indices, H_{-i-i} and h_{-ii}."""
    others = _others(i, V.shape[1])
    V_minus = V[:, others]
    H = V_minus.T @ V_minus - bracket_contract(e, W, others, others)
    h = V_minus.T @ V[:, i] - bracket_contract(e, W, others, [i])[:, 0]
    return others, H, h


def solve_block(i: int, H: np.ndarray, rhs: np.ndarray,
                settings: SensitivitySettings) -> Tuple[np.ndarray, float]:
    """H^{-1} rhs with a symmetric factorization, and the scaled condition number.

    H is Jacobi-scaled first so the condition number does not depend on
    parameter units.
    """
    scale = np.sqrt(np.abs(np.diag(H)))
    if np.any(scale == 0.0) or not np.all(np.isfinite(H)):
        raise SingularityError(i, np.inf)
    scaled = H / np.outer(scale, scale)
    condition = float(np.linalg.cond(scaled))
    if not np.isfinite(condition) or condition > settings.singular_condition:
        raise SingularityError(i, condition)
    solution = linalg.solve(scaled, rhs / scale[:, None] if rhs.ndim == 2 else rhs / scale,
                            assume_a='sym')
    solution = solution / scale[:, None] if solution.ndim == 2 else solution / scale
    return solution, condition


def _profile_column(i: int, V: np.ndarray, W: np.ndarray, e: np.ndarray,
                    settings: SensitivitySettings) -> Tuple[np.ndarray, Optional[float]]:
    if V.shape[1] == 1:
        return V[:, i].copy(), None
    others, H, h = conditional_blocks(i, V, W, e)
    correction, condition = solve_block(i, H, h, settings)
    return V[:, i] - V[:, others] @ correction, condition


def profile_vector_full(i: int, V: np.ndarray, W: np.ndarray, e: Sequence[float],
                        settings: Optional[SensitivitySettings] = None) -> np.ndarray:
    """Profile-based sensitivity column p_i from first and second derivatives."""
    settings = settings or SensitivitySettings()
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    e = np.asarray(e, dtype=float)
    _check_arrays(V, W, e)
    p, condition = _profile_column(i, V, W, e, settings)
    if condition is not None and condition >= settings.warn_condition:
        logger.warning("ill_conditioned_block", param=i + 1, condition=condition)
    return p


def _reduced_basis(i: int, V: np.ndarray, settings: SensitivitySettings) -> Optional[np.ndarray]:
    others = _others(i, V.shape[1])
    if not others:
        return None
    V_minus = V[:, others]
    norms = np.linalg.norm(V_minus, axis=0)
    if np.any(norms == 0.0) or V_minus.shape[0] < V_minus.shape[1]:
        raise SingularityError(i, np.inf)
    condition = float(np.linalg.cond(V_minus / norms) ** 2)
    if not np.isfinite(condition) or condition > settings.singular_condition:
        raise SingularityError(i, condition)
    Q, _ = np.linalg.qr(V_minus)
    return Q


def projection_component(i: int, V: np.ndarray,
                         settings: Optional[SensitivitySettings] = None) -> np.ndarray:
    """Orthogonal projection of v_i onto span(V_{-i})."""
    settings = settings or SensitivitySettings()
    V = np.asarray(V, dtype=float)
    _check_arrays(V, None, None)
    Q = _reduced_basis(i, V, settings)
    if Q is None:
        return np.zeros(V.shape[0])
    return Q @ (Q.T @ V[:, i])


def profile_vector_reduced(i: int, V: np.ndarray,
                           settings: Optional[SensitivitySettings] = None) -> np.ndarray:
    """Zero-residual p_i: residual of regressing v_i on V_{-i} (QR based)."""
    V = np.asarray(V, dtype=float)
    return V[:, i] - projection_component(i, V, settings)


def assemble_profile_matrix(V: np.ndarray, W: np.ndarray, e: np.ndarray,
                            settings: Optional[SensitivitySettings] = None,
                            ) -> Tuple[np.ndarray, List[Dict[str, Any]]]:
    """P column by column, with conditioning warnings."""
    settings = settings or SensitivitySettings()
    _check_arrays(V, W, e)
    P = np.empty_like(V)
    warnings: List[Dict[str, Any]] = []
    for i in range(V.shape[1]):
        P[:, i], condition = _profile_column(i, V, W, e, settings)
        if condition is not None and condition >= settings.warn_condition:
            warnings.append({'param': i + 1, 'condition': condition})
    return P, warnings


@dataclass(frozen=True, eq=False)
class SensitivityBundle:
    """V, W, e and P at one evaluation point."""
    V: np.ndarray
    W: np.ndarray
    e: np.ndarray
    P: np.ndarray
    residual_mode: ResidualMode
    eval_point: np.ndarray
    warnings: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.V.shape[1]

    def to_frame(self) -> pd.DataFrame:
        """Rows ``row, v_1..v_k, p_1..p_k, q_1..q_k`` with q_i = v_i - p_i."""
        frame = pd.DataFrame({'row': np.arange(1, self.V.shape[0] + 1)})
        for a in range(self.k):
            frame[f"v_{a + 1}"] = self.V[:, a]
        for a in range(self.k):
            frame[f"p_{a + 1}"] = self.P[:, a]
        for a in range(self.k):
            frame[f"q_{a + 1}"] = self.V[:, a] - self.P[:, a]
        return frame

    def metadata(self) -> Dict[str, Any]:
        return {
            'residual_mode': self.residual_mode.value,
            'eval_point': self.eval_point.tolist(),
            'condition_warnings': list(self.warnings),
        }


def profile_matrix(model: ModelSpec, dataset: Dataset, theta: Sequence[float],
                   residual_mode: ResidualMode = ResidualMode.OBSERVED,
                   settings: Optional[SensitivitySettings] = None) -> SensitivityBundle:
    """Sensitivity bundle of ``dataset`` at ``theta``."""
    residual_mode = ResidualMode(residual_mode)
    theta = np.asarray(theta, dtype=float)
    V = build_jacobian(model, dataset, theta)
    W = build_second_derivatives(model, dataset, theta)
    if residual_mode is ResidualMode.OBSERVED:
        e = dataset.require_response() - predict(model, dataset, theta)
    else:
        e = np.zeros(dataset.n)
    P, warnings = assemble_profile_matrix(V, W, e, settings)
    for warning in warnings:
        logger.warning("ill_conditioned_block", model=model.name, **warning)
    return SensitivityBundle(V=V, W=W, e=e, P=P, residual_mode=residual_mode,
                             eval_point=theta.copy(), warnings=warnings)
