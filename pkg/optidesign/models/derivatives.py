"""Central finite-difference derivatives of a scalar response in the parameters."""

from typing import Callable

import numpy as np

ResponseFn = Callable[[np.ndarray, np.ndarray], float]

_EPS = np.finfo(float).eps
GRADIENT_STEP = np.sqrt(_EPS)
HESSIAN_STEP = _EPS ** 0.25


def _step(theta_a: float, scale: float) -> float:
    return scale * (1.0 + abs(theta_a))


def central_gradient(f: ResponseFn, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Gradient of ``f(x, .)`` at ``theta`` with step sqrt(eps)*(1+|theta_a|)."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty(theta.size)
    for a in range(theta.size):
        h = _step(theta[a], GRADIENT_STEP)
        up = theta.copy()
        down = theta.copy()
        up[a] += h
        down[a] -= h
        # divide by the representable step, not h
        grad[a] = (f(x, up) - f(x, down)) / (up[a] - down[a])
    return grad


def central_hessian(f: ResponseFn, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Second derivatives of ``f(x, .)`` with step eps**(1/4)*(1+|theta_a|)."""
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    steps = np.array([_step(t, HESSIAN_STEP) for t in theta])
    centre = f(x, theta)
    hess = np.empty((k, k))

    def shifted(*moves):
        point = theta.copy()
        for index, sign in moves:
            point[index] += sign * steps[index]
        return f(x, point)

    for a in range(k):
        hess[a, a] = (shifted((a, 1)) - 2.0 * centre + shifted((a, -1))) / steps[a] ** 2
        for b in range(a + 1, k):
            value = (
                shifted((a, 1), (b, 1)) - shifted((a, 1), (b, -1))
                - shifted((a, -1), (b, 1)) + shifted((a, -1), (b, -1))
            ) / (4.0 * steps[a] * steps[b])
            hess[a, b] = value
            hess[b, a] = value
    return hess
