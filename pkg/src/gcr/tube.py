"""Empirical response variance inside segment tubes.

The tube around the segment from ``x_i`` to ``x_j`` collects every sample
within distance ``r`` of the segment that also lies between the two capping
hyperplanes. The unbiased variance of the responses found there is the
connection criterion used by generalized contour regression.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Dataset
from ._kernels import pair_tube_stats
from .geometry import Segment


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class TubeVarianceResult:
    variance: Optional[float]
    occupancy: int

    @property
    def insufficient(self) -> bool:
        return self.variance is None


def empirical_variance(values) -> float:
    """Two-pass unbiased sample variance (denominator ``m - 1``)."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size < 2:
        raise InsufficientDataError(f"need at least 2 values, got {v.size}")
    dev = v - v.mean()
    return float(dev @ dev) / (v.size - 1)


def tube_members(data: Dataset, i: int, j: int, r: float) -> np.ndarray:
    """Indices of all samples inside the tube around ``x_i x_j``, ascending."""
    i, j = _check_pair(data.n, i, j, r)
    _, _, members = pair_tube_stats(data.X, data.y, min(i, j), max(i, j), float(r))
    return members


def _check_pair(n, i, j, r):
    for idx in (i, j):
        if not -n <= idx < n:
            raise IndexError(f"sample index {idx} out of range for n={n}")
    i, j = i % n, j % n
    if i == j:
        raise ValueError("tube endpoints must be distinct samples")
    if not r > 0:
        raise ValueError(f"tube radius must be positive, got {r}")
    return i, j


def tube_variance(data: Dataset, i: int, j: int, r: float) -> TubeVarianceResult:
    """Variance of the responses of all samples inside the tube around ``x_i x_j``.

    The scan always covers the full dataset and includes both endpoints.
    """
    i, j = _check_pair(data.n, i, j, r)
    # canonical orientation makes the result exactly symmetric in (i, j)
    occ, var, _ = pair_tube_stats(data.X, data.y, min(i, j), max(i, j), float(r))
    if occ < 2:
        return TubeVarianceResult(None, int(occ))
    return TubeVarianceResult(float(var), int(occ))


def segment_variance_oracle(f, seg: Segment, m: int = 10_000) -> float:
    """Population variance of ``f`` on ``m`` equispaced points along ``seg``."""
    if m < 2:
        raise ValueError("need at least 2 quadrature points")
    t = np.linspace(0.0, 1.0, m)
    pts = (1.0 - t)[:, None] * seg.a[None, :] + t[:, None] * seg.b[None, :]
    vals = np.array([f(p) for p in pts], dtype=float)
    return float(np.var(vals))
