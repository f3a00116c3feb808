"""Segment and tube geometry, orthonormal bases and subspace distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BASIS_TOL = 1e-10
SOLVER_TOL = 1e-8


class RankDeficientError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))


@dataclass(frozen=True)
class TubeSpec:
    segment: Segment
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"tube radius must be positive, got {self.radius}")


def check_basis(phi, tol=BASIS_TOL):
    """Return ``phi`` as a 2-D float array after checking column orthonormality."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None]
    D, d = phi.shape
    if not 1 <= d <= D:
        raise DimensionMismatchError(f"basis must satisfy 1 <= d <= D, got shape {phi.shape}")
    err = np.linalg.norm(phi.T @ phi - np.eye(d))
    if err > tol:
        raise ValueError(f"basis columns are not orthonormal (||P^T P - I||_F = {err:.3e})")
    return phi


def point_segment_distance(p, seg: Segment) -> float:
    """Euclidean distance from ``p`` to the closed segment ``seg``."""
    p = np.asarray(p, dtype=float)
    w = seg.b - seg.a
    ww = float(w @ w)
    if ww == 0.0:
        return float(np.linalg.norm(p - seg.a))
    t = np.clip(float((p - seg.a) @ w) / ww, 0.0, 1.0)
    return float(np.linalg.norm(p - (seg.a + t * w)))


def tube_contains(p, tube: TubeSpec) -> bool:
    """Membership in the capped cylinder around ``tube.segment``.

    A point belongs to the tube when it is within ``radius`` of the segment
    and lies between the two hyperplanes through the endpoints that are
    orthogonal to the segment.
    """
    p = np.asarray(p, dtype=float)
    a, b = tube.segment.a, tube.segment.b
    return bool(
        point_segment_distance(p, tube.segment) <= tube.radius
        and (p - a) @ (b - a) >= 0
        and (p - b) @ (a - b) >= 0
    )


def orthonormalize(M) -> np.ndarray:
    """Orthonormal basis for the column space of a full-column-rank matrix.

    Uses a thin QR factorization; the rank check is done on singular values
    so that nearly dependent columns are rejected rather than silently
    amplified.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[-1] <= 1e-12 * s[0]:
        raise RankDeficientError("columns are linearly dependent")
    Q, R = np.linalg.qr(M)
    # fix signs so that an already orthonormal input comes back unchanged
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def projection_matrix(phi) -> np.ndarray:
    """Orthogonal projector ``phi @ phi.T`` onto the span of ``phi``."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None]
    P = phi @ phi.T
    return 0.5 * (P + P.T)


def projection_distance(phi_hat, phi) -> float:
    """Spectral norm of the difference of the two orthogonal projectors.

    Equals the sine of the largest canonical angle between the subspaces,
    so the value is 0 for identical spans and 1 when some direction of one
    subspace is orthogonal to the other.
    """
    phi_hat = np.atleast_2d(np.asarray(phi_hat, dtype=float).T).T
    phi = np.atleast_2d(np.asarray(phi, dtype=float).T).T
    if phi_hat.shape != phi.shape:
        raise DimensionMismatchError(
            f"bases must have identical shape, got {phi_hat.shape} and {phi.shape}"
        )
    diff = projection_matrix(phi) - projection_matrix(phi_hat)
    evals = np.linalg.eigvalsh(diff)
    return float(min(1.0, np.max(np.abs(evals))))


def sin_largest_angle(phi_hat, phi) -> float:
    """Sine of the largest canonical angle, from the singular values of ``phi^T phi_hat``."""
    phi_hat = np.atleast_2d(np.asarray(phi_hat, dtype=float).T).T
    phi = np.atleast_2d(np.asarray(phi, dtype=float).T).T
    s = np.linalg.svd(phi.T @ phi_hat, compute_uv=False)
    c = min(1.0, float(s.min()))
    if c * c < 0.5:
        return float(np.sqrt(1.0 - c * c))
    # small angles: sqrt(1 - c^2) cancels; use the orthogonal residual instead
    resid = phi_hat - phi @ (phi.T @ phi_hat)
    return float(np.linalg.norm(resid, 2))


def smallest_eigvecs(S, d: int):
    """Eigenvectors of the ``d`` smallest eigenvalues of a symmetric matrix.

    Returns
    -------
    basis : ndarray, shape (D, d)
    eigenvalues : ndarray, shape (d,)
        Sorted ascending.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {S.shape}")
    D = S.shape[0]
    if not 1 <= d <= D:
        raise DimensionMismatchError(f"need 1 <= d <= {D}, got d={d}")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if np.max(np.abs(S - S.T)) > SOLVER_TOL * scale:
        raise ValueError("matrix is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (S + S.T))
    return evecs[:, :d], evals[:d]


def largest_eigvecs(S, d: int):
    """Eigenvectors of the ``d`` largest eigenvalues, eigenvalues descending."""
    S = np.asarray(S, dtype=float)
    vecs, vals = smallest_eigvecs(-S, d)
    return vecs, -vals
