"""Regression data container shared by the estimators."""

from dataclasses import dataclass

import numpy as np

from .core_math import as_matrix
from .errors import DimensionError, EmptyInput


@dataclass
class RegressionDataset:
    """Covariates ``X`` (n x p) and responses ``Y`` (n x d), one row per unit."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.X = as_matrix(self.X, "X")
        self.Y = as_matrix(self.Y, "Y")
        if self.X.shape[0] != self.Y.shape[0]:
            raise DimensionError(
                f"X has {self.X.shape[0]} rows but Y has {self.Y.shape[0]}")
        if self.X.shape[0] < 1:
            raise EmptyInput("dataset has no rows")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def d(self):
        return self.Y.shape[1]

    def residuals(self, b):
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if b.shape != (self.d, self.p):
            raise DimensionError(f"b must be {self.d}x{self.p}, got {b.shape}")
        return self.Y - self.X @ b.T

    def centered(self):
        """Copy with column-centered covariates."""
        return RegressionDataset(self.X - self.X.mean(axis=0), self.Y.copy())
