"""Low-dimensional regression after the subspace is estimated.

Two regressors share the ``predict(Z)`` interface:

* :class:`PiecewisePolyModel`, least-squares polynomials of bounded total
  degree on a regular ``K^d`` partition of ``[-B, B]^d``, truncated to
  ``[-M, M]``;
* :class:`KernelModel`, Gaussian kernel ridge regression.

:class:`ComposedModel` chains a basis with either regressor so that
``f_hat(x) = g_hat(basis.T @ x)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.spatial.distance import cdist, pdist

LSTSQ_RCOND = 1e-10


class SingularSystemError(LinAlgError):
    pass


@dataclass(frozen=True)
class PartitionSpec:
    B: float
    K: int
    d: int
    degree: int

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError("B must be positive")
        if self.K < 1 or self.d < 1 or self.degree < 0:
            raise ValueError(f"invalid partition {self}")

    @property
    def side(self) -> float:
        return 2.0 * self.B / self.K

    @property
    def n_terms(self) -> int:
        return math.comb(self.d + self.degree, self.d)


def monomial_exponents(d: int, degree: int) -> np.ndarray:
    """Exponent tuples of all monomials in ``d`` variables of total degree <= ``degree``."""
    exps = [e for e in itertools.product(range(degree + 1), repeat=d) if sum(e) <= degree]
    exps.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return np.array(exps, dtype=int).reshape(len(exps), d)


def _design(U, exps):
    # U: (m, d) local coordinates
    return np.prod(U[:, None, :] ** exps[None, :, :], axis=2)


def _locate(Z, spec: PartitionSpec):
    """Clamp ``Z`` into the domain; return cell indices and local coordinates in [-1, 1]."""
    Zc = np.clip(Z, -spec.B, spec.B)
    h = spec.side
    cells = np.floor((Zc + spec.B) / h).astype(int)
    cells = np.clip(cells, 0, spec.K - 1)
    centers = -spec.B + (cells + 0.5) * h
    return cells, (Zc - centers) / (0.5 * h)


@dataclass
class PiecewisePolyModel:
    spec: PartitionSpec
    coeffs: Dict[Tuple[int, ...], np.ndarray]
    M: float

    def raw(self, Z) -> np.ndarray:
        """Untruncated piecewise-polynomial values."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        cells, U = _locate(Z, self.spec)
        V = _design(U, monomial_exponents(self.spec.d, self.spec.degree))
        shape = (self.spec.K,) * self.spec.d
        table = np.zeros((self.spec.K ** self.spec.d, self.spec.n_terms))
        for cell, c in self.coeffs.items():
            table[np.ravel_multi_index(cell, shape)] = c
        flat = np.ravel_multi_index(cells.T, shape)
        return np.einsum("ij,ij->i", V, table[flat])

    def predict(self, Z) -> np.ndarray:
        return np.clip(self.raw(Z), -self.M, self.M)

    def to_dict(self) -> dict:
        return {
            "kind": "piecewise_poly",
            "B": self.spec.B,
            "K": self.spec.K,
            "d": self.spec.d,
            "degree": self.spec.degree,
            "M": self.M,
            "coeffs": {",".join(map(str, k)): v.tolist() for k, v in sorted(self.coeffs.items())},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PiecewisePolyModel":
        spec = PartitionSpec(float(doc["B"]), int(doc["K"]), int(doc["d"]), int(doc["degree"]))
        coeffs = {
            tuple(int(t) for t in k.split(",")): np.asarray(v, dtype=float)
            for k, v in doc["coeffs"].items()
        }
        return cls(spec, coeffs, float(doc["M"]))


def fit_piecewise_poly(Z, y, spec: PartitionSpec, M: float) -> PiecewisePolyModel:
    """Per-cell minimum-norm least squares; empty cells keep the zero polynomial.

    Cells do not share parameters, so solving each cell separately gives the
    global least-squares minimizer over the piecewise space.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    y = np.asarray(y, dtype=float)
    if Z.shape[1] != spec.d:
        raise ValueError(f"Z has {Z.shape[1]} columns but the partition has d={spec.d}")
    if not M > 0:
        raise ValueError("truncation level M must be positive")
    cells, U = _locate(Z, spec)
    V = _design(U, monomial_exponents(spec.d, spec.degree))
    flat = np.ravel_multi_index(cells.T, (spec.K,) * spec.d)
    order = np.argsort(flat, kind="stable")
    bounds = np.flatnonzero(np.diff(flat[order])) + 1
    coeffs = {}
    for group in np.split(order, bounds):
        if group.size == 0:
            continue
        c, *_ = np.linalg.lstsq(V[group], y[group], rcond=LSTSQ_RCOND)
        coeffs[tuple(int(t) for t in cells[group[0]])] = c
    return PiecewisePolyModel(spec, coeffs, float(M))


def predict_pp(model: PiecewisePolyModel, z) -> Union[float, np.ndarray]:
    z = np.asarray(z, dtype=float)
    if z.ndim <= 1 and z.size == model.spec.d:
        return float(model.predict(z.reshape(1, -1))[0])
    return model.predict(z)


def partition_K(n: int, s: float, d: int, sigma=None, M=None, C8=None) -> int:
    """Cells per axis for ``n`` samples of an ``(s, C)``-smooth function of ``d`` variables.

    Without the constants this is ``ceil((n / log n) ** (1 / (2s + d)))``.
    With ``sigma``, ``M`` and ``C8`` the sample count is first divided by
    ``max(sigma^2 + 2 C8 / n, 2 M^2 + 4 C8 / n)``.
    """
    if n < 3:
        raise ValueError("need n >= 3")
    ratio = n / math.log(n)
    if sigma is not None or M is not None or C8 is not None:
        if sigma is None or M is None or C8 is None:
            raise ValueError("sigma, M and C8 must be given together")
        ratio /= max(sigma ** 2 + 2 * C8 / n, 2 * M ** 2 + 4 * C8 / n)
    return max(1, math.ceil(ratio ** (1.0 / (2 * s + d))))


def degree_for_smoothness(s: float) -> int:
    return int(math.floor(s + 1)) - 1


def fit_stage_two(Z, y, s: float = 2.0) -> PiecewisePolyModel:
    """Piecewise polynomial fit with data-driven ``B`` and ``M``."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    y = np.asarray(y, dtype=float)
    B = float(np.max(np.abs(Z))) or 1.0
    M = float(np.max(np.abs(y))) or 1.0
    K = partition_K(max(3, Z.shape[0]), s, Z.shape[1])
    spec = PartitionSpec(B, K, Z.shape[1], degree_for_smoothness(s))
    return fit_piecewise_poly(Z, y, spec, M)


@dataclass
class KernelModel:
    centers: np.ndarray
    weights: np.ndarray
    bandwidth: float
    ridge: float

    def predict(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return gaussian_kernel(Z, self.centers, self.bandwidth) @ self.weights

    def to_dict(self) -> dict:
        return {
            "kind": "kernel",
            "centers": self.centers.tolist(),
            "weights": self.weights.tolist(),
            "bandwidth": self.bandwidth,
            "ridge": self.ridge,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KernelModel":
        return cls(
            np.asarray(doc["centers"], dtype=float).reshape(len(doc["weights"]), -1),
            np.asarray(doc["weights"], dtype=float),
            float(doc["bandwidth"]),
            float(doc["ridge"]),
        )


def gaussian_kernel(A, B, bandwidth):
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * bandwidth ** 2))


def median_bandwidth(Z, subsample: int = 500) -> float:
    """Median pairwise distance among the first ``subsample`` points."""
    Z = np.asarray(Z, dtype=float)[:subsample]
    if Z.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(Z)))
    return med if med > 0 else 1.0


def fit_kernel(Z, y, bandwidth: Optional[float] = None, ridge: float = 1e-3) -> KernelModel:
    """Solve ``(K + ridge I) w = y`` for the Gaussian kernel matrix ``K``."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    y = np.asarray(y, dtype=float)
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    h = median_bandwidth(Z) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    A = gaussian_kernel(Z, Z, h)
    A[np.diag_indices_from(A)] += ridge
    try:
        w = cho_solve(cho_factor(A, lower=True), y)
    except LinAlgError as exc:
        if ridge > 0:
            raise
        raise SingularSystemError("kernel matrix is singular; use ridge > 0") from exc
    return KernelModel(Z.copy(), w, h, float(ridge))


@dataclass
class ComposedModel:
    basis: np.ndarray
    g_hat: Union[PiecewisePolyModel, KernelModel]

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=float)
        dim = self.g_hat.spec.d if isinstance(self.g_hat, PiecewisePolyModel) else self.g_hat.centers.shape[1]
        if self.basis.shape[1] != dim:
            raise ValueError("basis column count does not match the regressor input dimension")

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.g_hat.predict(X @ self.basis)

    def to_dict(self) -> dict:
        return {"basis": self.basis.tolist(), "g_hat": self.g_hat.to_dict()}

    @classmethod
    def from_dict(cls, doc: dict) -> "ComposedModel":
        g = doc["g_hat"]
        g_hat = PiecewisePolyModel.from_dict(g) if g["kind"] == "piecewise_poly" else KernelModel.from_dict(g)
        return cls(np.asarray(doc["basis"], dtype=float), g_hat)


def predict_composed(model: ComposedModel, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(model.predict(x[None, :])[0])
    return model.predict(x)
