"""Configuration loading.

Settings come from a YAML file whose values may reference the environment with
``${VAR:-default}`` placeholders. Without a file, defaults apply; the environment
variables ``OPTIDESIGN_FIXTURES``, ``OPTIDESIGN_LOG_LEVEL`` and
``OPTIDESIGN_LOG_FORMAT`` still take effect.
"""

import os
import re
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigurationError

_PLACEHOLDER = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-([^}]*))?\}")

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "optidesign.yaml"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LoggingSettings(_Section):
    level: str = Field(default="INFO", description="Log level name")
    format: str = Field(default="json", pattern="^(json|console)$",
                        description="json or console rendering")


class EstimationSettings(_Section):
    ftol: float = Field(default=1e-12, gt=0, description="Relative SSE change tolerance")
    xtol: float = Field(default=1e-10, gt=0, description="Scaled step tolerance")
    gtol: float = Field(default=1e-12, gt=0, description="Gradient orthogonality tolerance")
    max_iterations: int = Field(default=200, ge=1, description="Residual evaluations allowed")
    normal_tolerance: float = Field(default=1e-6, gt=0, description="Bound on |V'e| relative to 1 + |y|")
    polish_steps: int = Field(default=10, ge=0, description="Gauss-Newton steps after Levenberg-Marquardt")


class SensitivitySettings(_Section):
    singular_condition: float = Field(default=1e12, gt=1, description="Condition number treated as singular")
    warn_condition: float = Field(default=1e8, gt=1, description="Condition number that triggers a warning")


class DesignSettings(_Section):
    grid_points: int = Field(default=50, ge=2, description="Grid points per design dimension")
    max_grid_evaluations: int = Field(default=1_000_000, ge=1, description="Grid size guard")
    simplex_max_iterations: int = Field(default=500, ge=1)
    simplex_tolerance: float = Field(default=1e-6, gt=0, description="Simplex diameter tolerance, scaled by 1+|x|")
    penalty_weight: float = Field(default=1e4, gt=0, description="Out-of-bounds quadratic penalty weight")
    recheck_threshold: float = Field(default=1e-9, ge=0, description="Relative improvement that triggers a restart")
    workers: int = Field(default=1, ge=1, description="Threads for grid evaluation")
    avoid_replicates: bool = Field(default=True, description="Skip optima that repeat an existing run")
    replicate_tolerance: float = Field(default=1e-3, ge=0, description="Repeat distance per unit region width")
    max_local_starts: int = Field(default=5, ge=1, description="Local maxima refined when avoiding a repeat")


class SimulationSettings(_Section):
    n_sims: int = Field(default=2000, ge=1)
    seed: int = Field(default=20240101)
    max_failure_fraction: float = Field(default=0.2, ge=0, le=1)
    workers: int = Field(default=1, ge=1, description="Threads for refits")


class FixtureSettings(_Section):
    directory: Optional[str] = Field(default=None, description="Override of the packaged fixture directory")


class MetricsSettings(_Section):
    enabled: bool = True
    textfile: Optional[str] = Field(default=None, description="Prometheus text-format output path")


class Settings(_Section):
    logging: LoggingSettings = Field(default_factory=LoggingSettings)
    estimation: EstimationSettings = Field(default_factory=EstimationSettings)
    sensitivity: SensitivitySettings = Field(default_factory=SensitivitySettings)
    design: DesignSettings = Field(default_factory=DesignSettings)
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)
    fixtures: FixtureSettings = Field(default_factory=FixtureSettings)
    metrics: MetricsSettings = Field(default_factory=MetricsSettings)


def expand_placeholders(value: Any) -> Any:
    """Replace ``${VAR:-default}`` in every string of a parsed YAML tree."""
    if isinstance(value, dict):
        return {key: expand_placeholders(item) for key, item in value.items()}
    if isinstance(value, list):
        return [expand_placeholders(item) for item in value]
    if isinstance(value, str):
        expanded = _PLACEHOLDER.sub(
            lambda match: os.getenv(match.group(1), match.group(2) or ""), value
        )
        if expanded != value:
            # re-parse so "${N:-50}" becomes an int and "" becomes null
            return yaml.safe_load(expanded) if expanded else None
        return value
    return value


def _environment_defaults() -> Dict[str, Any]:
    config: Dict[str, Any] = {'logging': {}, 'fixtures': {}}
    if os.getenv('OPTIDESIGN_LOG_LEVEL'):
        config['logging']['level'] = os.getenv('OPTIDESIGN_LOG_LEVEL')
    if os.getenv('OPTIDESIGN_LOG_FORMAT'):
        config['logging']['format'] = os.getenv('OPTIDESIGN_LOG_FORMAT')
    if os.getenv('OPTIDESIGN_FIXTURES'):
        config['fixtures']['directory'] = os.getenv('OPTIDESIGN_FIXTURES')
    return config


def load_settings(config_path: Optional[Union[str, Path]] = None) -> Settings:
    """Load configuration from file or environment."""
    path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
    if config_path and not path.exists():
        raise ConfigurationError(f"configuration file not found: {path}")

    if path.exists():
        try:
            with open(path, 'r', encoding='utf-8') as f:
                raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping")
        config = expand_placeholders(raw)
    else:
        config = _environment_defaults()

    try:
        return Settings.model_validate(config)
    except ValidationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
