"""Profile-based D-optimal experimental design for nonlinear regression."""

from .design import (
    CriterionKind,
    DesignOutcome,
    DesignRegion,
    design_efficiency,
    design_initial,
    design_sequential,
)
from .errors import OptiDesignError
from .estimation import FitResult, fit_conditional, fit_ls
from .models import Dataset, ModelSpec, NoiseModel
from .sensitivity import ResidualMode, SensitivityBundle, profile_matrix
from .simulation import SimulationPlan, SimulationReport, compare_reports, run_simulation
from .zoo import ZooEntry, available_models, get_entry, hougen_watson, michaelis_menten, register_model

__version__ = "1.0.0"

__all__ = [
    'CriterionKind',
    'Dataset',
    'DesignOutcome',
    'DesignRegion',
    'FitResult',
    'ModelSpec',
    'NoiseModel',
    'OptiDesignError',
    'ResidualMode',
    'SensitivityBundle',
    'SimulationPlan',
    'SimulationReport',
    'ZooEntry',
    'available_models',
    'compare_reports',
    'design_efficiency',
    'design_initial',
    'design_sequential',
    'fit_conditional',
    'fit_ls',
    'get_entry',
    'hougen_watson',
    'michaelis_menten',
    'profile_matrix',
    'register_model',
    'run_simulation',
]
