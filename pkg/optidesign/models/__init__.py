"""Model abstraction, datasets and derivative evaluation."""

from .dataset import Dataset
from .evaluation import (
    build_jacobian,
    build_second_derivatives,
    eval_hessian_point,
    eval_jacobian_row,
    eval_model,
    predict,
)
from .spec import DerivativeSource, ModelSpec, NoiseModel, ParamPartition

__all__ = [
    'Dataset',
    'DerivativeSource',
    'ModelSpec',
    'NoiseModel',
    'ParamPartition',
    'build_jacobian',
    'build_second_derivatives',
    'eval_hessian_point',
    'eval_jacobian_row',
    'eval_model',
    'predict',
]
