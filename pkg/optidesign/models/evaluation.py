"""Point-wise and dataset-wide model evaluation."""

from typing import Sequence

import numpy as np

from ..errors import ArgumentError, ModelEvaluationError
from .dataset import Dataset
from .spec import ModelSpec


def _point(model: ModelSpec, x) -> np.ndarray:
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.shape != (model.m,):
        raise ArgumentError(f"x must have {model.m} entries for model {model.name!r}, got shape {point.shape}")
    return point


def _theta(model: ModelSpec, theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (model.k,):
        raise ArgumentError(f"theta must have {model.k} entries for model {model.name!r}, got shape {theta.shape}")
    return theta


def eval_model(model: ModelSpec, x: Sequence[float], theta: Sequence[float]) -> float:
    """Predicted response f(x, theta)."""
    point, theta = _point(model, x), _theta(model, theta)
    value = float(model.f(point, theta))
    if not np.isfinite(value):
        raise ModelEvaluationError(point, theta)
    return value


def eval_jacobian_row(model: ModelSpec, x: Sequence[float], theta: Sequence[float]) -> np.ndarray:
    """Local sensitivities (df/dtheta_1, ..., df/dtheta_k) at one setting."""
    point, theta = _point(model, x), _theta(model, theta)
    row = model.gradient(point, theta).reshape(-1)
    if row.shape != (model.k,):
        raise ArgumentError(f"gradient of {model.name!r} returned shape {row.shape}")
    if not np.all(np.isfinite(row)):
        raise ModelEvaluationError(point, theta, what="gradient")
    return row


def eval_hessian_point(model: ModelSpec, x: Sequence[float], theta: Sequence[float]) -> np.ndarray:
    """Symmetric k x k matrix of second parameter derivatives at one setting."""
    point, theta = _point(model, x), _theta(model, theta)
    hess = model.hessian(point, theta)
    if hess.shape != (model.k, model.k):
        raise ArgumentError(f"hessian of {model.name!r} returned shape {hess.shape}")
    if not np.all(np.isfinite(hess)):
        raise ModelEvaluationError(point, theta, what="hessian")
    return 0.5 * (hess + hess.T)


def _rows(model: ModelSpec, dataset: Dataset):
    if dataset.m != model.m:
        raise ArgumentError(f"dataset has {dataset.m} design variables, model {model.name!r} needs {model.m}")
    return enumerate(dataset.X)


def predict(model: ModelSpec, dataset: Dataset, theta: Sequence[float]) -> np.ndarray:
    """eta(theta): predicted responses for every run."""
    out = np.empty(dataset.n)
    for j, x in _rows(model, dataset):
        try:
            out[j] = eval_model(model, x, theta)
        except ModelEvaluationError as exc:
            raise exc.with_row(j) from exc
    return out


def build_jacobian(model: ModelSpec, dataset: Dataset, theta: Sequence[float]) -> np.ndarray:
    """n x k matrix V of local sensitivities, rows in dataset order."""
    V = np.empty((dataset.n, model.k))
    for j, x in _rows(model, dataset):
        try:
            V[j] = eval_jacobian_row(model, x, theta)
        except ModelEvaluationError as exc:
            raise exc.with_row(j) from exc
    return V


def build_second_derivatives(model: ModelSpec, dataset: Dataset, theta: Sequence[float]) -> np.ndarray:
    """n x k x k array W with W[j] the hessian of f at run j."""
    W = np.empty((dataset.n, model.k, model.k))
    for j, x in _rows(model, dataset):
        try:
            W[j] = eval_hessian_point(model, x, theta)
        except ModelEvaluationError as exc:
            raise exc.with_row(j) from exc
    return W
