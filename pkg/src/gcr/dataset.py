from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import check_basis


@dataclass(frozen=True)
class Truth:
    """Planted ground truth attached to a synthetic dataset."""

    phi: np.ndarray
    d: int
    f_values: np.ndarray
    example_id: Optional[str] = None
    seed: Optional[int] = None
    # link function in planted coordinates, z = phi.T @ x; not serialized
    g: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        phi = check_basis(self.phi)
        if phi.shape[1] != self.d:
            raise ValueError(f"truth basis has {phi.shape[1]} columns but d={self.d}")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "f_values", np.asarray(self.f_values, dtype=float))


@dataclass(frozen=True)
class Dataset:
    """Labelled samples ``(X, y)`` with optional planted truth."""

    X: np.ndarray
    y: np.ndarray
    truth: Optional[Truth] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 2:
            raise ValueError("a dataset needs at least 2 samples")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        if self.truth is not None and self.truth.phi.shape[0] != X.shape[1]:
            raise ValueError("truth basis dimension does not match X")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def D(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        truth = self.truth
        if truth is not None:
            truth = Truth(truth.phi, truth.d, truth.f_values[idx], truth.example_id, truth.seed, truth.g)
        return Dataset(self.X[idx], self.y[idx], truth)
