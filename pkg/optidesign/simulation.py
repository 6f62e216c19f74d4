"""Monte-Carlo evaluation of a sequential design point.

Each simulation draws a response at the new point from the base estimate plus
normal noise, refits all n+1 runs from the base estimate and records the
linear-approximation standard errors and correlations. The n existing
responses stay at their observed values.
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import structlog

from . import metrics
from .design.criteria import log_det_gram
from .design.region import DesignRegion
from .errors import (
    ArgumentError,
    ConvergenceError,
    ModelEvaluationError,
    SimulationAbortedError,
)
from .estimation import FitResult, fit_ls
from .models import Dataset, ModelSpec, NoiseModel, build_jacobian, eval_model
from .settings import Settings

logger = structlog.get_logger(__name__)


class StartStrategy(Enum):
    BASE_ESTIMATE = "base-estimate"
    FIXED = "fixed"


@dataclass(frozen=True, eq=False)
class SimulationPlan:
    """One design point to evaluate by repeated simulated refits.

    ``noise`` defaults to N(0, s2) with s2 from ``base_fit``. Refits start
    from the base estimate unless ``start_strategy`` is FIXED, in which case
    ``start_theta`` is used.
    """
    model: ModelSpec
    base_fit: FitResult
    base_dataset: Dataset
    new_point: np.ndarray
    n_sims: int = 2000
    noise: Optional[NoiseModel] = None
    seed: int = 20240101
    start_strategy: StartStrategy = StartStrategy.BASE_ESTIMATE
    start_theta: Optional[np.ndarray] = None
    region: Optional[DesignRegion] = None
    label: str = ""

    def __post_init__(self):
        point = np.asarray(self.new_point, dtype=float).reshape(-1)
        object.__setattr__(self, 'new_point', point)
        object.__setattr__(self, 'start_strategy', StartStrategy(self.start_strategy))
        if self.n_sims < 1:
            raise ArgumentError(f"n_sims must be >= 1, got {self.n_sims}")
        if point.size != self.model.m:
            raise ArgumentError(f"new point has {point.size} settings, model needs {self.model.m}")
        if self.region is not None and not self.region.contains(point):
            raise ArgumentError(f"new point {point.tolist()} lies outside the design region")
        if not self.base_fit.converged:
            raise ArgumentError("simulation needs a converged base fit")
        if self.base_dataset.m != self.model.m:
            raise ArgumentError("base dataset does not match the model")
        if self.start_strategy is StartStrategy.FIXED:
            if self.start_theta is None or np.size(self.start_theta) != self.model.k:
                raise ArgumentError(f"fixed start needs {self.model.k} starting values")
        if self.noise is None and not self.base_fit.s2 > 0:
            raise ArgumentError("base fit has zero residual variance; give an explicit noise sigma")

    @property
    def noise_model(self) -> NoiseModel:
        return self.noise if self.noise is not None else NoiseModel(float(np.sqrt(self.base_fit.s2)))

    @property
    def start(self) -> np.ndarray:
        if self.start_strategy is StartStrategy.FIXED:
            return np.asarray(self.start_theta, dtype=float)
        return self.base_fit.theta_hat

    def metadata(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'model': self.model.name,
            'new_point': self.new_point.tolist(),
            'n_sims': self.n_sims,
            'seed': self.seed,
            'sigma': self.noise_model.sigma,
            'sigma_source': 'plan' if self.noise is not None else 'base-fit',
            'start_strategy': self.start_strategy.value,
            'base_estimate': self.base_fit.theta_hat.tolist(),
        }


@dataclass(frozen=True, eq=False)
class SimulationRecord:
    index: int
    converged: bool
    theta_hat: Optional[np.ndarray] = None
    std_errors: Optional[np.ndarray] = None
    correlation: Optional[np.ndarray] = None
    logdet: Optional[float] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class StatSummary:
    """Summary statistics of one simulated quantity."""
    name: str
    count: int
    mean: float
    median: float
    std_dev: float
    min_value: float
    max_value: float
    q05: float
    q25: float
    q75: float
    q95: float

    @classmethod
    def from_values(cls, name: str, values: Sequence[float]) -> 'StatSummary':
        """Create summary from values."""
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            nan = float('nan')
            return cls(name=name, count=0, mean=nan, median=nan, std_dev=nan,
                       min_value=nan, max_value=nan, q05=nan, q25=nan, q75=nan, q95=nan)
        q05, q25, q75, q95 = np.quantile(values, [0.05, 0.25, 0.75, 0.95])
        return cls(
            name=name,
            count=int(values.size),
            mean=float(np.mean(values)),
            median=float(np.median(values)),
            std_dev=float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
            min_value=float(values.min()),
            max_value=float(values.max()),
            q05=float(q05), q25=float(q25), q75=float(q75), q95=float(q95),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {key: (None if isinstance(value, float) and not np.isfinite(value) else value)
                for key, value in self.__dict__.items() if key != 'name'}


def _pairs(k: int) -> List[tuple]:
    return list(itertools.combinations(range(k), 2))


def _pair_name(a: int, b: int) -> str:
    return f"corr_{a + 1}{b + 1}" if max(a, b) < 9 else f"corr_{a + 1}_{b + 1}"


@dataclass(frozen=True)
class ReportComparison:
    """Paired outcome of two reports over sims where both converged.

    Win fractions count report ``a`` beating ``b``; ties count one half.
    ``mean_d_efficiency`` averages exp((logdet_a - logdet_b)/k) * 100.
    """
    label_a: str
    label_b: str
    n_pairs: int
    se_wins: Dict[str, float]
    correlation_wins: Dict[str, float]
    mean_d_efficiency: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'a': self.label_a,
            'b': self.label_b,
            'n_pairs': self.n_pairs,
            'se_wins': dict(self.se_wins),
            'correlation_wins': dict(self.correlation_wins),
            'mean_d_efficiency': self.mean_d_efficiency,
        }


@dataclass(frozen=True, eq=False)
class SimulationReport:
    plan: SimulationPlan
    per_sim: List[SimulationRecord]
    n_failed: int
    summaries: Dict[str, StatSummary]
    comparison: Optional[ReportComparison] = None

    @property
    def k(self) -> int:
        return self.plan.model.k

    @property
    def n_sims(self) -> int:
        return len(self.per_sim)

    def converged_records(self) -> List[SimulationRecord]:
        return [record for record in self.per_sim if record.converged]

    def with_comparison(self, comparison: ReportComparison) -> 'SimulationReport':
        return SimulationReport(plan=self.plan, per_sim=self.per_sim, n_failed=self.n_failed,
                                summaries=self.summaries, comparison=comparison)

    def to_frame(self) -> pd.DataFrame:
        """One row per simulation: ``sim, corr_ab.., se_a.., logdet, converged``."""
        rows = []
        for record in self.per_sim:
            row: Dict[str, Any] = {'sim': record.index + 1}
            for a, b in _pairs(self.k):
                row[_pair_name(a, b)] = record.correlation[a, b] if record.converged else np.nan
            for a in range(self.k):
                row[f"se_{a + 1}"] = record.std_errors[a] if record.converged else np.nan
            row['logdet'] = record.logdet if record.converged else np.nan
            row['converged'] = record.converged
            rows.append(row)
        return pd.DataFrame(rows)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'plan': self.plan.metadata(),
            'n_sims': self.n_sims,
            'n_failed': self.n_failed,
            'summaries': {name: summary.to_dict() for name, summary in self.summaries.items()},
            'comparison': self.comparison.to_dict() if self.comparison is not None else None,
        }


def _simulate_one(plan: SimulationPlan, index: int, mean_response: float,
                  settings: Settings) -> SimulationRecord:
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, index]))
    y_new = mean_response + float(plan.noise_model.sample(rng))
    dataset = plan.base_dataset.append(plan.new_point, y_new)
    try:
        fit = fit_ls(plan.model, dataset, plan.start, settings.estimation, settings.sensitivity)
    except (ConvergenceError, ModelEvaluationError) as exc:
        metrics.simulations_total.labels(outcome='failed').inc()
        return SimulationRecord(index=index, converged=False, error=str(exc))
    if fit.covariance is None:
        metrics.simulations_total.labels(outcome='failed').inc()
        return SimulationRecord(index=index, converged=False, theta_hat=fit.theta_hat,
                                error="covariance unavailable")
    metrics.simulations_total.labels(outcome='converged').inc()
    return SimulationRecord(
        index=index,
        converged=True,
        theta_hat=fit.theta_hat,
        std_errors=fit.std_errors,
        correlation=fit.correlation,
        logdet=log_det_gram(build_jacobian(plan.model, dataset, fit.theta_hat)),
    )


def _summarize(k: int, records: List[SimulationRecord]) -> Dict[str, StatSummary]:
    summaries: Dict[str, StatSummary] = {}
    for a, b in _pairs(k):
        name = _pair_name(a, b)
        summaries[name] = StatSummary.from_values(name, [r.correlation[a, b] for r in records])
    for a in range(k):
        name = f"se_{a + 1}"
        summaries[name] = StatSummary.from_values(name, [r.std_errors[a] for r in records])
    summaries['logdet'] = StatSummary.from_values('logdet', [r.logdet for r in records])
    return summaries


def run_simulation(plan: SimulationPlan, settings: Optional[Settings] = None) -> SimulationReport:
    """Run every simulation of ``plan``; deterministic for a given seed.

    Each simulation draws from its own generator seeded by (seed, index), so
    threaded and serial runs give identical records.
    """
    settings = settings or Settings()
    mean_response = eval_model(plan.model, plan.new_point, plan.base_fit.theta_hat)
    indices = range(plan.n_sims)
    logger.info("simulation_started", **plan.metadata())

    if settings.simulation.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.simulation.workers) as pool:
            per_sim = list(pool.map(lambda s: _simulate_one(plan, s, mean_response, settings), indices))
    else:
        per_sim = [_simulate_one(plan, s, mean_response, settings) for s in indices]

    n_failed = sum(1 for record in per_sim if not record.converged)
    limit = settings.simulation.max_failure_fraction
    if n_failed > limit * plan.n_sims:
        logger.error("simulation_aborted", n_failed=n_failed, n_sims=plan.n_sims)
        raise SimulationAbortedError(n_failed, plan.n_sims, limit)

    converged = [record for record in per_sim if record.converged]
    logger.info("simulation_finished", label=plan.label, n_failed=n_failed)
    return SimulationReport(plan=plan, per_sim=per_sim, n_failed=n_failed,
                            summaries=_summarize(plan.model.k, converged))


def _win_fraction(a: np.ndarray, b: np.ndarray) -> float:
    wins = np.where(a < b, 1.0, np.where(a == b, 0.5, 0.0))
    return float(wins.mean())


def compare_reports(a: SimulationReport, b: SimulationReport) -> ReportComparison:
    """Paired comparison of two reports built with the same model and n_sims."""
    if a.n_sims != b.n_sims:
        raise ArgumentError(f"reports differ in n_sims ({a.n_sims} vs {b.n_sims})")
    if a.plan.model.name != b.plan.model.name or a.k != b.k:
        raise ArgumentError("reports were produced with different models")

    pairs = [(ra, rb) for ra, rb in zip(a.per_sim, b.per_sim) if ra.converged and rb.converged]
    if not pairs:
        raise ArgumentError("no simulation converged in both reports")
    k = a.k

    se_wins = {}
    for p in range(k):
        se_wins[f"se_{p + 1}"] = _win_fraction(np.array([ra.std_errors[p] for ra, _ in pairs]),
                                               np.array([rb.std_errors[p] for _, rb in pairs]))
    correlation_wins = {}
    for p, q in _pairs(k):
        correlation_wins[_pair_name(p, q)] = _win_fraction(
            np.abs([ra.correlation[p, q] for ra, _ in pairs]),
            np.abs([rb.correlation[p, q] for _, rb in pairs]),
        )

    logdets = [(ra.logdet, rb.logdet) for ra, rb in pairs]
    mean_d_efficiency = None
    if all(np.isfinite(la) and np.isfinite(lb) for la, lb in logdets):
        diffs = np.array([la - lb for la, lb in logdets])
        mean_d_efficiency = float(np.mean(np.exp(diffs / k)) * 100.0)

    return ReportComparison(label_a=a.plan.label, label_b=b.plan.label, n_pairs=len(pairs),
                            se_wins=se_wins, correlation_wins=correlation_wins,
                            mean_d_efficiency=mean_d_efficiency)
