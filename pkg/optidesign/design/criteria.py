"""D and D_P criteria, the element-wise P'P expansion and D-efficiency."""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import qr

from .. import metrics
from ..errors import ArgumentError
from ..sensitivity import conditional_blocks, solve_block
from ..settings import SensitivitySettings

# exp() overflows past this
_MAX_LOG = np.log(np.finfo(float).max)


class CriterionKind(Enum):
    D = "d"
    DP = "dp"

    @property
    def label(self) -> str:
        return "D" if self is CriterionKind.D else "D_P"


class EfficiencyMode(Enum):
    LITERAL = "literal"
    SAME_MATRIX = "same-matrix"


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if np.isfinite(value) else None


@dataclass(frozen=True)
class CriterionValue:
    """log det(M'M) of a k-column sensitivity matrix; -inf when singular."""
    logdet: float
    criterion: CriterionKind
    k: int

    @property
    def det(self) -> float:
        if self.logdet == -np.inf:
            return 0.0
        if self.logdet > _MAX_LOG:
            return float('inf')
        return float(np.exp(self.logdet))

    @property
    def singular(self) -> bool:
        return self.logdet == -np.inf

    def to_dict(self) -> Dict[str, Any]:
        return {
            'criterion': self.criterion.label,
            'logdet': _finite_or_none(self.logdet),
            'det': _finite_or_none(self.det),
            'k': self.k,
        }


@dataclass(frozen=True)
class EfficiencyReport:
    """exp((numerator - denominator) / k) as a percentage."""
    d_eff: float
    numerator_logdet: float
    denominator_logdet: float
    mode: EfficiencyMode
    k: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'd_eff': self.d_eff,
            'numerator_logdet': self.numerator_logdet,
            'denominator_logdet': self.denominator_logdet,
            'interpretation_mode': self.mode.value,
            'k': self.k,
        }


def log_det_gram(M: np.ndarray) -> float:
    """log det(M'M) from the R factor of M; -inf at numerical rank < k."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ArgumentError(f"sensitivity matrix must be 2-D, got shape {M.shape}")
    n, k = M.shape
    if n < k:
        raise ArgumentError(f"need at least k = {k} rows, got n = {n}")
    if not np.all(np.isfinite(M)):
        raise ArgumentError("sensitivity matrix contains non-finite entries")
    R = qr(M, mode='r')[0]
    diag = np.abs(np.diag(R[:k, :k]))
    largest = diag.max() if diag.size else 0.0
    if largest == 0.0 or diag.min() <= max(n, k) * np.finfo(float).eps * largest:
        return float('-inf')
    return float(2.0 * np.sum(np.log(diag)))


def d_criterion(V: np.ndarray) -> CriterionValue:
    """Local D criterion, log det(V'V)."""
    metrics.criterion_evaluations.labels(criterion='D').inc()
    return CriterionValue(log_det_gram(V), CriterionKind.D, np.shape(V)[1])


def dp_criterion(P: np.ndarray) -> CriterionValue:
    """Profile-based criterion, log det(P'P)."""
    metrics.criterion_evaluations.labels(criterion='D_P').inc()
    return CriterionValue(log_det_gram(P), CriterionKind.DP, np.shape(P)[1])


def _correction(i: int, V: np.ndarray, W: np.ndarray, e: np.ndarray,
                settings: SensitivitySettings) -> Tuple[list, np.ndarray]:
    others, H, h = conditional_blocks(i, V, W, e)
    return others, solve_block(i, H, h, settings)[0]


def ptp_terms(i: int, j: int, V: np.ndarray, W: np.ndarray, e: Sequence[float],
              settings: Optional[SensitivitySettings] = None) -> Tuple[float, float, float, float]:
    """The four terms whose signed sum t1 - t2 - t3 + t4 is p_i'p_j.

    t1 = v_i'v_j, t2 = v_i'V_{-j}H_{-j-j}^{-1}h_{-jj},
    t3 = h_{-ii}'H_{-i-i}^{-1}V_{-i}'v_j,
    t4 = h_{-ii}'H_{-i-i}^{-1}V_{-i}'V_{-j}H_{-j-j}^{-1}h_{-jj}.
    """
    settings = settings or SensitivitySettings()
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    e = np.asarray(e, dtype=float)
    k = V.shape[1]
    if W.shape != (V.shape[0], k, k) or e.shape != (V.shape[0],):
        raise ArgumentError("V, W and e dimensions disagree")
    t1 = float(V[:, i] @ V[:, j])
    if k == 1:
        return t1, 0.0, 0.0, 0.0
    others_i, a_i = _correction(i, V, W, e, settings)
    others_j, a_j = _correction(j, V, W, e, settings)
    shift_i = V[:, others_i] @ a_i
    shift_j = V[:, others_j] @ a_j
    return t1, float(V[:, i] @ shift_j), float(shift_i @ V[:, j]), float(shift_i @ shift_j)


def ptp_element(i: int, j: int, V: np.ndarray, W: np.ndarray, e: Sequence[float],
                settings: Optional[SensitivitySettings] = None) -> float:
    """(P'P)_{ij} by the four-term expansion."""
    t1, t2, t3, t4 = ptp_terms(i, j, V, W, e, settings)
    return t1 - t2 - t3 + t4


def d_efficiency(numerator_logdet: float, denominator_logdet: float, k: int,
                 mode: EfficiencyMode = EfficiencyMode.LITERAL) -> EfficiencyReport:
    """D-efficiency in percent: exp((numerator - denominator) / k) * 100."""
    if not (np.isfinite(numerator_logdet) and np.isfinite(denominator_logdet)):
        raise ArgumentError("D-efficiency needs finite log-determinants")
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    d_eff = float(np.exp((numerator_logdet - denominator_logdet) / k) * 100.0)
    return EfficiencyReport(d_eff=d_eff, numerator_logdet=float(numerator_logdet),
                            denominator_logdet=float(denominator_logdet),
                            mode=EfficiencyMode(mode), k=k)


def augment(M: np.ndarray, row: Sequence[float]) -> np.ndarray:
    """Stack one candidate sensitivity row beneath M."""
    row = np.asarray(row, dtype=float).reshape(-1)
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[1] != row.size:
        raise ArgumentError(f"row of length {row.size} does not fit a matrix of shape {M.shape}")
    return np.vstack([M, row[None, :]])
