"""Experimental designs with optional observed responses."""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import ArgumentError, DatasetFormatError
from .spec import ModelSpec


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """n experimental settings (n x m) and, optionally, their responses.

    Replicated runs are repeated rows.
    """
    X: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ArgumentError(f"design matrix must be n x m with n >= 1, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ArgumentError("design matrix contains non-finite settings")
        object.__setattr__(self, 'X', _frozen(X))

        if self.y is not None:
            y = np.array(self.y, dtype=float).reshape(-1)
            if y.shape[0] != X.shape[0]:
                raise ArgumentError(f"response length {y.shape[0]} does not match n = {X.shape[0]}")
            if not np.all(np.isfinite(y)):
                raise ArgumentError("responses contain non-finite values")
            object.__setattr__(self, 'y', _frozen(y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def has_response(self) -> bool:
        return self.y is not None

    def require_response(self) -> np.ndarray:
        if self.y is None:
            raise ArgumentError("dataset has no observed responses")
        return self.y

    def validate_for(self, model: ModelSpec) -> 'Dataset':
        if self.m != model.m:
            raise ArgumentError(f"dataset has {self.m} design variables, model {model.name!r} needs {model.m}")
        for j, row in enumerate(self.X):
            if not model.within_bounds(row):
                raise ArgumentError(f"row {j} {row.tolist()} outside the bounds of model {model.name!r}")
        return self

    def design_only(self) -> 'Dataset':
        return Dataset(self.X)

    def with_response(self, y: Sequence[float]) -> 'Dataset':
        return Dataset(self.X, y)

    def append(self, x: Sequence[float], y: Optional[float] = None) -> 'Dataset':
        """Dataset with one extra run at ``x``."""
        row = np.asarray(x, dtype=float).reshape(1, -1)
        if row.shape[1] != self.m:
            raise ArgumentError(f"new run has {row.shape[1]} settings, dataset has m = {self.m}")
        X = np.vstack([self.X, row])
        if self.has_response != (y is not None):
            raise ArgumentError("appended run must carry a response exactly when the dataset does")
        if y is None:
            return Dataset(X)
        return Dataset(X, np.append(self.y, float(y)))

    def replicated(self, times: int) -> 'Dataset':
        """Every row repeated ``times`` times in place."""
        if times < 1:
            raise ArgumentError("replication count must be >= 1")
        X = np.repeat(self.X, times, axis=0)
        y = None if self.y is None else np.repeat(self.y, times)
        return Dataset(X, y)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.X, columns=[f"x{c + 1}" for c in range(self.m)])
        if self.y is not None:
            frame['y'] = self.y
        return frame

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'X': self.X.tolist()}
        if self.y is not None:
            data['y'] = self.y.tolist()
        return data

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')

    @classmethod
    def from_csv(cls, path: Union[str, Path], m: Optional[int] = None) -> 'Dataset':
        """Read ``x1,...,xm[,y]`` CSV; errors name ``file:line``."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"dataset not found: {path}")
        try:
            frame = pd.read_csv(path, dtype=str, encoding='utf-8', skipinitialspace=True)
        except pd.errors.EmptyDataError:
            raise DatasetFormatError(str(path), 1, "empty file")
        except pd.errors.ParserError as exc:
            raise DatasetFormatError(str(path), None, str(exc).strip())

        columns = [str(c).strip() for c in frame.columns]
        has_y = bool(columns) and columns[-1] == 'y'
        x_columns = columns[:-1] if has_y else columns
        expected = [f"x{c + 1}" for c in range(len(x_columns))]
        if not x_columns or x_columns != expected:
            raise DatasetFormatError(str(path), 1, f"header must be x1..xm[,y], got {','.join(columns)}")
        if m is not None and len(x_columns) != m:
            raise DatasetFormatError(str(path), 1, f"expected {m} design variables, header has {len(x_columns)}")
        if frame.empty:
            raise DatasetFormatError(str(path), 2, "no data rows")

        stripped = frame.apply(lambda column: column.str.strip())
        # astype(float) parses each cell exactly; to_numeric is only used to find the bad row
        try:
            data = stripped.astype(float).to_numpy()
        except (TypeError, ValueError):
            data = stripped.apply(pd.to_numeric, errors='coerce').to_numpy(dtype=float)
        bad = ~np.isfinite(data).all(axis=1)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DatasetFormatError(str(path), row + 2, "missing or non-numeric value")

        if has_y:
            return cls(data[:, :-1], data[:, -1])
        return cls(data)
