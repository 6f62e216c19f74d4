"""Model abstraction, parameter partitioning and the noise model."""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..errors import ArgumentError
from .derivatives import central_gradient, central_hessian

ResponseFn = Callable[[np.ndarray, np.ndarray], float]
GradientFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
HessianFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class DerivativeSource(Enum):
    """Where first and second parameter derivatives come from."""
    ANALYTIC = "analytic"
    FINITE_DIFFERENCE = "finite-difference"


@dataclass(frozen=True)
class ModelSpec:
    """A single-response nonlinear regression model f(x, theta).

    ``grad`` and ``hess`` are optional analytic evaluators; whichever is
    missing falls back to central finite differences of ``f``. ``lower`` and
    ``upper`` are the model's design-variable domain, used to validate
    datasets (not the design region of a particular study).
    """
    name: str
    k: int
    m: int
    f: ResponseFn
    grad: Optional[GradientFn] = None
    hess: Optional[HessianFn] = None
    lower: Optional[Tuple[float, ...]] = None
    upper: Optional[Tuple[float, ...]] = None
    param_names: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise ArgumentError(f"model {self.name!r} needs k >= 1 and m >= 1")
        if not self.param_names:
            object.__setattr__(self, 'param_names',
                               tuple(f"theta{a + 1}" for a in range(self.k)))
        for bound in (self.lower, self.upper):
            if bound is not None and len(bound) != self.m:
                raise ArgumentError(f"model {self.name!r} bounds must have {self.m} entries")

    @property
    def derivative_source(self) -> DerivativeSource:
        if self.grad is not None and self.hess is not None:
            return DerivativeSource.ANALYTIC
        return DerivativeSource.FINITE_DIFFERENCE

    def gradient(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        if self.grad is not None:
            return np.asarray(self.grad(x, theta), dtype=float)
        return central_gradient(self.f, x, theta)

    def hessian(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        if self.hess is not None:
            return np.asarray(self.hess(x, theta), dtype=float)
        return central_hessian(self.f, x, theta)

    def with_finite_differences(self) -> 'ModelSpec':
        """Same response, derivatives from the finite-difference engine."""
        return replace(self, name=f"{self.name}[fd]", grad=None, hess=None)

    def within_bounds(self, x: Sequence[float]) -> bool:
        point = np.asarray(x, dtype=float)
        if self.lower is not None and np.any(point < np.asarray(self.lower)):
            return False
        if self.upper is not None and np.any(point > np.asarray(self.upper)):
            return False
        return True


@dataclass(frozen=True)
class ParamPartition:
    """Split of theta into the parameter of interest and its co-parameters.

    ``i`` is 0-based.
    """
    i: int
    k: int
    others: Tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if not 0 <= self.i < self.k:
            raise ArgumentError(f"parameter index {self.i} outside 0..{self.k - 1}")
        object.__setattr__(self, 'others',
                           tuple(a for a in range(self.k) if a != self.i))

    def split(self, theta: Sequence[float]) -> Tuple[float, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.k,):
            raise ArgumentError(f"theta must have {self.k} entries, got {theta.shape}")
        return float(theta[self.i]), theta[list(self.others)].copy()

    def merge(self, theta_i: float, theta_minus: Sequence[float]) -> np.ndarray:
        theta_minus = np.asarray(theta_minus, dtype=float)
        if theta_minus.shape != (self.k - 1,):
            raise ArgumentError(
                f"co-parameter vector must have {self.k - 1} entries, got {theta_minus.shape}"
            )
        theta = np.empty(self.k)
        theta[self.i] = theta_i
        theta[list(self.others)] = theta_minus
        return theta


@dataclass(frozen=True)
class NoiseModel:
    """Additive spherical normal observation noise."""
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ArgumentError(f"noise sigma must be positive, got {self.sigma}")

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(0.0, self.sigma, size=size)
