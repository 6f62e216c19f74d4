"""Nonlinear least-squares estimation and inference regions."""

from .fitting import (
    ConditionalFit,
    FitResult,
    fit_conditional,
    fit_ls,
    linear_covariance,
    project_fit,
    sum_of_squares,
)
from .regions import (
    EllipseDescriptor,
    GridMode,
    SSEGrid,
    confidence_ellipse,
    likelihood_level,
    profile_trace,
    sse_grid,
)

__all__ = [
    'ConditionalFit',
    'EllipseDescriptor',
    'FitResult',
    'GridMode',
    'SSEGrid',
    'confidence_ellipse',
    'fit_conditional',
    'fit_ls',
    'likelihood_level',
    'linear_covariance',
    'profile_trace',
    'project_fit',
    'sse_grid',
    'sum_of_squares',
]
