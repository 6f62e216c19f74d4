"""Exception hierarchy for optidesign."""

from typing import Any, Dict, List, Optional, Sequence

import numpy as np


class OptiDesignError(Exception):
    """Base class for every error raised by the library."""


class ArgumentError(OptiDesignError, ValueError):
    """Invalid arguments: dimension mismatch, missing responses, bad region."""


class ConfigurationError(OptiDesignError):
    """Configuration file could not be read or validated."""


class DatasetFormatError(OptiDesignError):
    """Malformed dataset file. Message carries ``file:line``."""

    def __init__(self, path: str, line: Optional[int], message: str):
        self.path = path
        self.line = line
        location = f"{path}:{line}" if line is not None else path
        super().__init__(f"{location}: {message}")


class ModelEvaluationError(OptiDesignError):
    """Model produced a non-finite value."""

    def __init__(self, x: Sequence[float], theta: Sequence[float],
                 row: Optional[int] = None, what: str = "response"):
        self.x = np.asarray(x, dtype=float).tolist()
        self.theta = np.asarray(theta, dtype=float).tolist()
        self.row = row
        self.what = what
        where = f" (row {row})" if row is not None else ""
        super().__init__(
            f"non-finite {what} at x={self.x}, theta={self.theta}{where}"
        )

    def with_row(self, row: int) -> 'ModelEvaluationError':
        return ModelEvaluationError(self.x, self.theta, row=row, what=self.what)


class ConvergenceError(OptiDesignError):
    """Least-squares solver stopped without meeting its tolerances."""

    def __init__(self, message: str, theta: Sequence[float], sse: float,
                 iterations: int, trace: Optional[List[Dict[str, Any]]] = None):
        self.theta = np.asarray(theta, dtype=float).tolist()
        self.sse = float(sse)
        self.iterations = iterations
        self.trace = trace or []
        super().__init__(
            f"{message} after {iterations} evaluations "
            f"(theta={self.theta}, sse={self.sse:.6g})"
        )


class SingularityError(OptiDesignError):
    """Conditional information block is singular for parameter ``index``."""

    def __init__(self, index: int, condition: float):
        self.index = index
        self.condition = float(condition)
        super().__init__(
            f"singular co-parameter block for theta_{index + 1} "
            f"(condition number {self.condition:.3g})"
        )


class CovarianceUnavailableError(OptiDesignError):
    """Covariance matrix is singular or was never computed."""


class UnsupportedOperationError(OptiDesignError):
    """Operation not defined for this model shape."""


class FixtureMissingError(OptiDesignError):
    """Required fixture file is not present."""

    def __init__(self, path: str):
        self.path = path
        super().__init__(
            f"fixture required: {path} (set OPTIDESIGN_FIXTURES to its directory)"
        )


class FixtureIntegrityError(OptiDesignError):
    """Fixture data does not reproduce its reference fit."""


class SimulationAbortedError(OptiDesignError):
    """Too many simulation refits failed."""

    def __init__(self, n_failed: int, n_sims: int, limit: float):
        self.n_failed = n_failed
        self.n_sims = n_sims
        super().__init__(
            f"{n_failed}/{n_sims} simulation refits failed "
            f"(limit {limit:.0%}); aborting"
        )
