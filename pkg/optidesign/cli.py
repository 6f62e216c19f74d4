"""Command-line front end.

    optidesign fit --model michaelis-menten --data puromycin.csv
    optidesign design-seq --model michaelis-menten --criterion dp \\
        --data puromycin.csv --region 0.001:1.1

Results go to ``--out`` (or stdout); diagnostics go to stderr. Exit status
is 0 on success, 1 on a computation error and 2 on a usage error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import metrics
from .design import (
    CriterionKind,
    DesignRegion,
    EfficiencyMode,
    design_efficiency,
    design_initial,
    design_sequential,
)
from .errors import (
    ArgumentError,
    ConfigurationError,
    DatasetFormatError,
    FixtureMissingError,
    OptiDesignError,
)
from .estimation import (
    GridMode,
    confidence_ellipse,
    fit_ls,
    likelihood_level,
    profile_trace,
    sse_grid,
)
from .log import configure_logging
from .models import Dataset, NoiseModel, predict
from .sensitivity import ResidualMode, profile_matrix
from .settings import Settings, load_settings
from .simulation import SimulationPlan, compare_reports, run_simulation
from .zoo import ZooEntry, get_entry

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_COMPUTATION = 1
EXIT_USAGE = 2

_USAGE_ERRORS = (ArgumentError, ConfigurationError, DatasetFormatError, FixtureMissingError,
                 FileNotFoundError, ValidationError)


def parse_vector(text: str) -> List[float]:
    """``"1,2.5"`` -> [1.0, 2.5]."""
    try:
        return [float(part) for part in str(text).split(',') if part.strip()]
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from None


def parse_points(text: str) -> List[List[float]]:
    """``"1.1;0.085"`` or ``"100,350,30;251,294,41.5"``: points split by ';'."""
    return [parse_vector(point) for point in str(text).split(';') if point.strip()]


def parse_grid(text: str) -> np.ndarray:
    """``"lo:hi:n"`` -> n evenly spaced values."""
    parts = str(text).split(':')
    if len(parts) != 3:
        raise ValueError(f"grid must be lo:hi:n, got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 2 or not lo < hi:
        raise ValueError(f"grid needs lo < hi and n >= 2, got {text!r}")
    return np.linspace(lo, hi, n)


class RunConfig(BaseModel):
    """Validated arguments of one CLI invocation."""
    model_config = ConfigDict(extra='forbid')

    command: Literal['fit', 'sens', 'design-init', 'design-seq', 'efficiency', 'simulate', 'contour']
    model: str = Field(default='michaelis-menten', description="Zoo model name")
    data: Optional[str] = Field(default=None, description="Dataset CSV (x1..xm[,y])")
    fixtures: Optional[str] = Field(default=None, description="Fixture directory override")
    theta0: Optional[List[float]] = Field(default=None, description="Starting or nominal parameter values")
    theta: Optional[List[float]] = Field(default=None, description="Evaluation point override")
    region: Optional[str] = Field(default=None, description="lo:hi per design variable, comma-separated")
    criterion: Literal['d', 'dp'] = 'd'
    residual_mode: Literal['observed', 'zero'] = 'observed'
    grid: Optional[int] = Field(default=None, ge=2)
    n_support: Optional[int] = Field(default=None, ge=1)
    replications: int = Field(default=1, ge=1)
    candidates: Optional[Literal['corners', 'corners+data']] = None
    recheck: bool = True
    allow_replicates: bool = Field(default=False, description="Keep a sequential optimum that repeats a run")
    d_design: Optional[List[List[float]]] = None
    dp_design: Optional[List[List[float]]] = None
    ellipse_level: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    level: float = Field(default=0.90, gt=0.0, lt=1.0)
    grid1: Optional[str] = None
    grid2: Optional[str] = None
    mode: Literal['pairs', 'trace'] = 'pairs'
    param: Optional[int] = Field(default=None, ge=1, description="1-based parameter index")
    plan: Optional[str] = None
    compare: Optional[str] = None
    seed: Optional[int] = None
    sims: Optional[int] = Field(default=None, ge=1)
    out: Optional[str] = None
    csv: Optional[str] = None
    meta: Optional[str] = None

    @field_validator('theta0', 'theta', mode='before')
    @classmethod
    def _vector(cls, value):
        return parse_vector(value) if isinstance(value, str) else value

    @field_validator('d_design', 'dp_design', mode='before')
    @classmethod
    def _points(cls, value):
        return parse_points(value) if isinstance(value, str) else value

    @field_validator('grid1', 'grid2')
    @classmethod
    def _grid(cls, value):
        if value is not None:
            parse_grid(value)
        return value

    @model_validator(mode='after')
    def _required_per_command(self) -> 'RunConfig':
        required = {
            'fit': ['data'],
            'sens': ['data'],
            'design-init': ['theta0'],
            'design-seq': ['data'],
            'efficiency': ['theta0', 'd_design', 'dp_design'],
            'simulate': ['plan'],
            'contour': ['data', 'grid1'],
        }[self.command]
        if self.command == 'contour' and self.param is None:
            required = required + ['grid2']
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.command} requires --{', --'.join(m.replace('_', '-') for m in missing)}")
        return self


class PlanFile(BaseModel):
    """Simulation plan as read from ``--plan``."""
    model_config = ConfigDict(extra='forbid')

    model: str = 'michaelis-menten'
    data: Optional[str] = None
    theta0: Optional[List[float]] = None
    new_point: List[float]
    n_sims: Optional[int] = Field(default=None, ge=1)
    sigma: Optional[float] = Field(default=None, gt=0.0)
    seed: Optional[int] = None
    start_theta: Optional[List[float]] = None
    region: Optional[str] = None
    label: str = ""


def _clean(value: Any) -> Any:
    """numpy scalars/arrays to plain types; non-finite floats to null."""
    if isinstance(value, dict):
        return {str(key): _clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(item) for item in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def emit_json(payload: Dict[str, Any], path: Optional[str]) -> None:
    text = json.dumps(_clean(payload), indent=2, sort_keys=False) + "\n"
    if path:
        Path(path).write_text(text, encoding='utf-8')
    else:
        sys.stdout.write(text)


def _emit_frame(frame, path: Optional[str]) -> None:
    target = path if path else sys.stdout
    frame.to_csv(target, index=False, float_format='%.17g', lineterminator='\n')


def _entry(config: RunConfig, settings: Settings, name: Optional[str] = None) -> ZooEntry:
    name = name or config.model
    if name == 'hougen-watson':
        return get_entry(name, fixture_dir=config.fixtures or settings.fixtures.directory)
    return get_entry(name)


def _dataset(entry: ZooEntry, path: str) -> Dataset:
    return Dataset.from_csv(path, m=entry.model.m).validate_for(entry.model)


def _region(entry: ZooEntry, text: Optional[str]) -> DesignRegion:
    return DesignRegion.parse(text) if text else entry.default_region


def _theta0(entry: ZooEntry, theta0: Optional[Sequence[float]]) -> np.ndarray:
    return np.asarray(theta0, dtype=float) if theta0 is not None else entry.theta0


def _fit(entry: ZooEntry, dataset: Dataset, config: RunConfig, settings: Settings):
    return fit_ls(entry.model, dataset, _theta0(entry, config.theta0), settings.estimation,
                  settings.sensitivity)


def _cmd_fit(config: RunConfig, settings: Settings) -> None:
    entry = _entry(config, settings)
    dataset = _dataset(entry, config.data)
    fit = _fit(entry, dataset, config, settings)
    payload = {'model': entry.model.name, **fit.to_dict()}
    if config.ellipse_level is not None:
        ellipse = confidence_ellipse(fit, config.ellipse_level)
        payload['ellipse'] = ellipse.to_dict()
        if entry.model.k == 2 and config.csv:
            boundary = ellipse.boundary()
            _emit_frame(pd.DataFrame({'theta1': boundary[:, 0], 'theta2': boundary[:, 1]}), config.csv)
    emit_json(payload, config.out)


def _cmd_sens(config: RunConfig, settings: Settings) -> None:
    entry = _entry(config, settings)
    dataset = _dataset(entry, config.data)
    mode = ResidualMode(config.residual_mode)
    theta = config.theta
    if theta is None:
        theta = _fit(entry, dataset, config, settings).theta_hat
    bundle = profile_matrix(entry.model, dataset, theta, mode, settings.sensitivity)
    _emit_frame(bundle.to_frame(), config.out)
    if config.meta:
        emit_json({'model': entry.model.name, **bundle.metadata()}, config.meta)


def _cmd_design_init(config: RunConfig, settings: Settings) -> None:
    entry = _entry(config, settings)
    outcome = design_initial(
        entry.model, config.theta0, config.n_support or entry.model.k,
        _region(entry, config.region), CriterionKind(config.criterion),
        points_per_dim=config.grid, replications=config.replications, settings=settings,
    )
    emit_json({'model': entry.model.name, **outcome.to_dict()}, config.out)


def _candidates(entry: ZooEntry, region: DesignRegion, dataset: Dataset,
                which: Optional[str]) -> Optional[np.ndarray]:
    if which is None:
        return None
    points = region.corners()
    if which == 'corners+data':
        points = np.vstack([points, dataset.X])
    return points


def _cmd_design_seq(config: RunConfig, settings: Settings) -> None:
    entry = _entry(config, settings)
    dataset = _dataset(entry, config.data)
    region = _region(entry, config.region)
    fit = _fit(entry, dataset, config, settings)
    outcome = design_sequential(
        entry.model, fit, dataset, region, CriterionKind(config.criterion),
        theta=config.theta, residual_mode=ResidualMode(config.residual_mode),
        points_per_dim=config.grid, candidates=_candidates(entry, region, dataset, config.candidates),
        recheck=config.recheck, settings=settings,
        avoid_replicates=False if config.allow_replicates else None,
    )
    payload = {'model': entry.model.name, 'fit': fit.to_dict(), **outcome.to_dict()}
    payload['new_point'] = outcome.support_points[0].tolist()
    emit_json(payload, config.out)


def _cmd_efficiency(config: RunConfig, settings: Settings) -> None:
    entry = _entry(config, settings)
    base, residuals = None, None
    if config.data:
        base = _dataset(entry, config.data)
        if config.residual_mode == 'observed' and base.has_response:
            residuals = base.y - predict(entry.model, base, config.theta0)
    reports = design_efficiency(entry.model, config.theta0, config.d_design, config.dp_design,
                                base=base, residuals=residuals, settings=settings)
    emit_json({
        'model': entry.model.name,
        'theta': config.theta0,
        'default_mode': EfficiencyMode.LITERAL.value,
        'reports': {mode.value: report.to_dict() for mode, report in reports.items()},
    }, config.out)


def _load_plan(path: str, config: RunConfig, settings: Settings) -> SimulationPlan:
    plan_path = Path(path)
    if not plan_path.is_file():
        raise FileNotFoundError(f"plan not found: {plan_path}")
    try:
        raw = json.loads(plan_path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(str(plan_path), exc.lineno, exc.msg) from None
    plan_file = PlanFile.model_validate(raw)
    entry = _entry(config, settings, name=plan_file.model)
    if plan_file.data:
        data_path = Path(plan_file.data)
        if not data_path.is_absolute():
            data_path = plan_path.parent / data_path
        dataset = _dataset(entry, str(data_path))
    else:
        dataset = entry.fixture
    if dataset is None:
        raise ArgumentError(f"plan {plan_path} needs a dataset for model {plan_file.model!r}")
    fit = fit_ls(entry.model, dataset, _theta0(entry, plan_file.theta0), settings.estimation,
                 settings.sensitivity)
    return SimulationPlan(
        model=entry.model,
        base_fit=fit,
        base_dataset=dataset,
        new_point=np.asarray(plan_file.new_point, dtype=float),
        n_sims=config.sims or plan_file.n_sims or settings.simulation.n_sims,
        noise=NoiseModel(plan_file.sigma) if plan_file.sigma is not None else None,
        seed=config.seed if config.seed is not None else (plan_file.seed if plan_file.seed is not None
                                                          else settings.simulation.seed),
        start_strategy='fixed' if plan_file.start_theta is not None else 'base-estimate',
        start_theta=np.asarray(plan_file.start_theta) if plan_file.start_theta is not None else None,
        region=DesignRegion.parse(plan_file.region) if plan_file.region else None,
        label=plan_file.label or plan_path.stem,
    )


def _cmd_simulate(config: RunConfig, settings: Settings) -> None:
    report = run_simulation(_load_plan(config.plan, config, settings), settings)
    if config.compare:
        other = run_simulation(_load_plan(config.compare, config, settings), settings)
        report = report.with_comparison(compare_reports(report, other))
    if config.csv:
        report.to_csv(config.csv)
    emit_json(report.to_dict(), config.out)


def _cmd_contour(config: RunConfig, settings: Settings) -> None:
    entry = _entry(config, settings)
    dataset = _dataset(entry, config.data)
    fit = _fit(entry, dataset, config, settings)
    grid1 = parse_grid(config.grid1)
    meta: Dict[str, Any] = {'model': entry.model.name, 'estimates': fit.theta_hat.tolist(), 'sse': fit.sse}

    if config.param is not None:
        i = config.param - 1
        if i >= entry.model.k:
            raise ArgumentError(f"--param {config.param} exceeds k = {entry.model.k}")
        start = np.delete(fit.theta_hat, i)
        trace = profile_trace(entry.model, dataset, i, grid1, start, settings.estimation)
        others = [a for a in range(entry.model.k) if a != i]
        frame = pd.DataFrame({f"theta{i + 1}": [c.theta_i for c in trace]})
        for column, a in enumerate(others):
            frame[f"theta{a + 1}"] = [c.theta_minus[column] for c in trace]
        frame['sse'] = [c.sse for c in trace]
        frame['converged'] = [c.converged for c in trace]
        _emit_frame(frame, config.out)
        meta['param'] = config.param
    else:
        mode = GridMode.CONDITIONAL_TRACE if config.mode == 'trace' else GridMode.UNCONDITIONAL_PAIRS
        grid = sse_grid(entry.model, dataset, grid1, parse_grid(config.grid2), mode,
                        start=fit.theta_hat, settings=settings.estimation)
        _emit_frame(grid.to_frame(), config.out)
        a, b, minimum = grid.minimum()
        meta.update({
            'mode': mode.value,
            'level': config.level,
            'contour_sse': likelihood_level(fit.sse, dataset.n, entry.model.k, config.level),
            'grid_minimum': {'theta1': float(grid.theta1[a, b]), 'theta2': float(grid.theta2[a, b]),
                             'sse': minimum},
        })
    if config.meta:
        emit_json(meta, config.meta)


_HANDLERS = {
    'fit': _cmd_fit,
    'sens': _cmd_sens,
    'design-init': _cmd_design_init,
    'design-seq': _cmd_design_seq,
    'efficiency': _cmd_efficiency,
    'simulate': _cmd_simulate,
    'contour': _cmd_contour,
}


def run(config: RunConfig, settings: Optional[Settings] = None) -> int:
    """Execute one command; returns the exit status."""
    settings = settings or Settings()
    try:
        _HANDLERS[config.command](config, settings)
    except _USAGE_ERRORS as exc:
        logger.error("usage_error", command=config.command, error=str(exc))
        return EXIT_USAGE
    except (OptiDesignError, ValueError) as exc:
        logger.error("computation_failed", command=config.command, error=str(exc))
        return EXIT_COMPUTATION
    finally:
        if settings.metrics.enabled and settings.metrics.textfile:
            metrics.write_metrics(settings.metrics.textfile)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='optidesign',
                                     description='Profile-based optimal experimental design')
    parser.add_argument('--config', help='YAML configuration file')
    parser.add_argument('--metrics-file', help='Write Prometheus counters to this file')
    parser.add_argument('--fixtures', help='Fixture directory (overrides OPTIDESIGN_FIXTURES)')
    subparsers = parser.add_subparsers(dest='command', help='Commands', required=True)

    def common(sub):
        sub.add_argument('--model', default='michaelis-menten', help='Zoo model name')
        sub.add_argument('--out', help='Output file (stdout if omitted)')

    fit_parser = subparsers.add_parser('fit', help='Least-squares fit of a dataset')
    common(fit_parser)
    fit_parser.add_argument('--data', help='Dataset CSV')
    fit_parser.add_argument('--theta0', help='Starting values v1,v2,...')
    fit_parser.add_argument('--ellipse-level', type=float, help='Add a confidence ellipse at this level')
    fit_parser.add_argument('--csv', help='Ellipse boundary CSV (two-parameter models)')

    sens_parser = subparsers.add_parser('sens', help='Local and profile-based sensitivities')
    common(sens_parser)
    sens_parser.add_argument('--data', help='Dataset CSV')
    sens_parser.add_argument('--theta0', help='Starting values for the fit')
    sens_parser.add_argument('--theta', help='Evaluate at this point instead of the fit')
    sens_parser.add_argument('--residual-mode', choices=['observed', 'zero'], default='observed')
    sens_parser.add_argument('--meta', help='JSON metadata output')

    init_parser = subparsers.add_parser('design-init', help='Initial D / D_P design')
    common(init_parser)
    init_parser.add_argument('--criterion', choices=['d', 'dp'], default='d')
    init_parser.add_argument('--theta0', help='Nominal parameter values')
    init_parser.add_argument('--region', help='lo1:hi1,lo2:hi2,...')
    init_parser.add_argument('--grid', type=int, help='Grid points per dimension')
    init_parser.add_argument('--n-support', type=int, help='Support points (default k)')
    init_parser.add_argument('--replications', type=int, default=1)

    seq_parser = subparsers.add_parser('design-seq', help='Sequential one-point D / D_P design')
    common(seq_parser)
    seq_parser.add_argument('--criterion', choices=['d', 'dp'], default='d')
    seq_parser.add_argument('--data', help='Existing runs CSV')
    seq_parser.add_argument('--theta0', help='Starting values for the fit')
    seq_parser.add_argument('--theta', help='Evaluate sensitivities here instead of the fit')
    seq_parser.add_argument('--residual-mode', choices=['observed', 'zero'], default='observed')
    seq_parser.add_argument('--region', help='lo1:hi1,lo2:hi2,...')
    seq_parser.add_argument('--grid', type=int, help='Grid points per dimension')
    seq_parser.add_argument('--candidates', choices=['corners', 'corners+data'],
                            help='Search an explicit candidate list instead of the grid')
    seq_parser.add_argument('--no-recheck', dest='recheck', action='store_false')
    seq_parser.add_argument('--allow-replicates', action='store_true',
                            help='Report the global optimum even when it repeats an existing run')

    eff_parser = subparsers.add_parser('efficiency', help='D-efficiency of a D vs a D_P design')
    common(eff_parser)
    eff_parser.add_argument('--theta0', help='Evaluation point')
    eff_parser.add_argument('--d-design', help='Points of the D design, p1;p2;...')
    eff_parser.add_argument('--dp-design', help='Points of the D_P design, p1;p2;...')
    eff_parser.add_argument('--data', help='Base runs; designs are then single added points')
    eff_parser.add_argument('--residual-mode', choices=['observed', 'zero'], default='observed')

    sim_parser = subparsers.add_parser('simulate', help='Monte-Carlo evaluation of a design point')
    sim_parser.add_argument('--plan', help='Plan JSON')
    sim_parser.add_argument('--compare', help='Second plan JSON for a paired comparison')
    sim_parser.add_argument('--seed', type=int)
    sim_parser.add_argument('--sims', type=int)
    sim_parser.add_argument('--out', help='Report JSON (stdout if omitted)')
    sim_parser.add_argument('--csv', help='Per-simulation CSV')

    contour_parser = subparsers.add_parser('contour', help='Sum-of-squares grid or profile trace')
    common(contour_parser)
    contour_parser.add_argument('--data', help='Dataset CSV')
    contour_parser.add_argument('--theta0', help='Starting values for the fit')
    contour_parser.add_argument('--grid1', help='lo:hi:n for theta1 (or the traced parameter)')
    contour_parser.add_argument('--grid2', help='lo:hi:n for theta2')
    contour_parser.add_argument('--mode', choices=['pairs', 'trace'], default='pairs')
    contour_parser.add_argument('--param', type=int, help='Profile trace of this parameter (1-based)')
    contour_parser.add_argument('--level', type=float, default=0.90)
    contour_parser.add_argument('--meta', help='JSON metadata output')
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {key: value for key, value in vars(args).items()
              if value is not None and key not in ('config', 'metrics_file')}
    return RunConfig.model_validate(values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args.config)
    except ConfigurationError as exc:
        configure_logging()
        logger.error("configuration_error", error=str(exc))
        return EXIT_USAGE
    configure_logging(settings.logging.level, settings.logging.format)
    if args.metrics_file:
        settings.metrics.textfile = args.metrics_file

    try:
        config = config_from_args(args)
    except ValidationError as exc:
        logger.error("invalid_arguments", command=args.command, error=str(exc))
        return EXIT_USAGE
    return run(config, settings)


if __name__ == "__main__":
    sys.exit(main())
