"""Active-subspace estimators: modified GCR, SCR and SIR.

All three return an orthonormal ``D x d`` basis. GCR and SCR take the
eigenvectors of the *smallest* eigenvalues of a covariance of sample
differences between points with (nearly) equal responses; SIR takes the
*largest* eigenvalues of the covariance of slice means.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh

from .dataset import Dataset
from .geometry import largest_eigvecs, orthonormalize, smallest_eigvecs
from ._kernels import greedy_connect

logger = logging.getLogger(__name__)


class NoPairsError(RuntimeError):
    """No pair of samples met the connection criterion; raise ``alpha``."""


class DegenerateError(RuntimeError):
    pass


@dataclass(frozen=True)
class GcrParams:
    alpha: float
    r: float
    shuffle_seed: Optional[int] = None  # None keeps the dataset order
    candidate_cap: Optional[int] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if self.candidate_cap is not None and self.candidate_cap < 1:
            raise ValueError("candidate_cap must be at least 1")


@dataclass
class GcrFitReport:
    G_hat: np.ndarray
    n_alpha: int
    pairs: List[Tuple[int, int]]
    basis: Optional[np.ndarray] = None
    eigenvalues: Optional[np.ndarray] = None
    n_evaluations: int = field(default=0, compare=False)


def default_r(n: int, D: int) -> float:
    return 2.0 * n ** (-1.0 / D)


def default_alpha(n: int, D: int, C: float) -> float:
    return C * n ** (-1.0 / D)


def _scan_order(n, seed):
    if seed is None:
        return np.arange(n)
    return np.random.default_rng(seed).permutation(n)


def gcr_connect(data: Dataset, params: GcrParams) -> GcrFitReport:
    """Greedy disjoint pairing of samples whose tube variance is at most ``alpha``.

    The first remaining sample leads; remaining samples are tried in order
    and the first one whose tube variance passes is paired with it. Both are
    then removed. A leader without a partner is removed alone. Tube
    membership is always evaluated against the full sample.
    """
    order = _scan_order(data.n, params.shuffle_seed).astype(np.int64)
    cap = 0 if params.candidate_cap is None else int(params.candidate_cap)
    X = np.ascontiguousarray(data.X)
    pair_arr, n_alpha, n_eval = greedy_connect(X, data.y, order, float(params.alpha), float(params.r), cap)
    if n_alpha == 0:
        raise NoPairsError(
            f"no connected pairs with alpha={params.alpha:g}, r={params.r:g}; increase alpha"
        )
    diffs = X[pair_arr[:, 0]] - X[pair_arr[:, 1]]
    G = diffs.T @ diffs / n_alpha
    pairs = [(int(i), int(j)) for i, j in pair_arr]
    return GcrFitReport(G_hat=0.5 * (G + G.T), n_alpha=int(n_alpha), pairs=pairs, n_evaluations=int(n_eval))


def structure_violations(report: GcrFitReport, X, tol: float = 1e-10) -> List[str]:
    """Broken invariants of a pairing: disjointness, the pair bound and the G identity."""
    X = np.asarray(X, dtype=float)
    problems = []
    flat = [k for p in report.pairs for k in p]
    if len(flat) != len(set(flat)):
        problems.append("a sample appears in more than one pair")
    if report.n_alpha != len(report.pairs) or report.n_alpha > X.shape[0] // 2:
        problems.append(f"n_alpha={report.n_alpha} breaks n_alpha <= floor(n/2)")
    if report.pairs:
        P = np.asarray(report.pairs)
        diffs = X[P[:, 0]] - X[P[:, 1]]
        gap = np.max(np.abs(report.G_hat * report.n_alpha - diffs.T @ diffs))
        if gap > tol:
            problems.append(f"G_hat reconstruction off by {gap:.3e}")
    return problems


def gcr_fit(data: Dataset, params: GcrParams, d: int) -> GcrFitReport:
    report = gcr_connect(data, params)
    evals = np.linalg.eigvalsh(report.G_hat)
    report.basis, _ = smallest_eigvecs(report.G_hat, d)
    report.eigenvalues = evals
    logger.debug("GCR: n_alpha=%d, evaluations=%d", report.n_alpha, report.n_evaluations)
    return report


def scr_pairs(data: Dataset, alpha: float) -> np.ndarray:
    """All unordered pairs ``(i, j)``, ``i < j``, with ``|y_i - y_j| <= alpha``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    y = data.y
    order = np.argsort(y, kind="stable")
    ys = y[order]
    hi = np.searchsorted(ys, ys + alpha * (1 + 1e-12), side="right")
    counts = hi - np.arange(y.size) - 1
    first = np.repeat(np.arange(y.size), counts)
    # offsets within each window: 1, 2, ..., counts[i]
    starts = np.cumsum(counts) - counts
    second = first + 1 + (np.arange(first.size) - np.repeat(starts, counts))
    keep = ys[second] - ys[first] <= alpha
    a, b = order[first[keep]], order[second[keep]]
    return np.column_stack([np.minimum(a, b), np.maximum(a, b)])


def scr_matrix(data: Dataset, alpha: float, chunk: int = 1 << 18):
    """Average outer product of differences over all SCR pairs."""
    pairs = scr_pairs(data, alpha)
    if pairs.shape[0] == 0:
        raise NoPairsError(f"no pair with |y_i - y_j| <= {alpha:g}; increase alpha")
    K = np.zeros((data.D, data.D))
    for s in range(0, pairs.shape[0], chunk):
        p = pairs[s:s + chunk]
        diffs = data.X[p[:, 0]] - data.X[p[:, 1]]
        K += diffs.T @ diffs
    K /= pairs.shape[0]
    return 0.5 * (K + K.T), pairs


def scr_fit(data: Dataset, alpha: float, d: int) -> np.ndarray:
    K, _ = scr_matrix(data, alpha)
    basis, _ = smallest_eigvecs(K, d)
    return basis


def sir_slices(n: int, n_slices: int) -> np.ndarray:
    """Equal-count slice sizes; the remainder goes one per slice from the first."""
    base, extra = divmod(n, n_slices)
    return np.array([base + (1 if h < extra else 0) for h in range(n_slices)])


def sir_matrix(data: Dataset, slice_target: int = 200, n_slices: Optional[int] = None):
    X, y, n = data.X, data.y, data.n
    if np.ptp(y) == 0:
        raise DegenerateError("responses are constant; slice means carry no information")
    H = n_slices if n_slices is not None else max(2, int(round(n / slice_target)))
    H = min(H, n)
    order = np.argsort(y, kind="stable")
    Xc = X - X.mean(axis=0)
    M = np.zeros((data.D, data.D))
    start = 0
    for size in sir_slices(n, H):
        m_h = Xc[order[start:start + size]].mean(axis=0)
        M += (size / n) * np.outer(m_h, m_h)
        start += size
    if np.max(np.abs(M)) <= 1e-14 * max(1.0, float(np.mean(Xc * Xc))):
        raise DegenerateError("slice-mean covariance is numerically zero")
    return 0.5 * (M + M.T)


def sir_fit(
    data: Dataset,
    d: int,
    slice_target: int = 200,
    n_slices: Optional[int] = None,
    whiten: bool = True,
) -> np.ndarray:
    """Sliced inverse regression.

    Parameters
    ----------
    data : Dataset
    d : int
        Subspace dimension.
    slice_target : int
        Approximate samples per equal-count slice.
    n_slices : int, optional
        Overrides the count derived from ``slice_target``.
    whiten : bool
        Solve ``M v = lambda S v`` with ``S`` the sample covariance of ``x``
        instead of taking eigenvectors of ``M`` alone. Both target the same
        subspace for isotropic inputs, but whitening cancels the part of the
        slice-mean noise explained by sample fluctuations of ``x``.

    Returns
    -------
    ndarray of shape (D, d)
        Orthonormal basis of the estimated subspace.
    """
    M = sir_matrix(data, slice_target, n_slices)
    if not whiten:
        return largest_eigvecs(M, d)[0]
    S = np.cov(data.X, rowvar=False, bias=True).reshape(data.D, data.D)
    try:
        _, V = eigh(M, S)
    except LinAlgError as exc:
        raise DegenerateError("sample covariance of x is singular; use whiten=False") from exc
    return orthonormalize(V[:, ::-1][:, :d])
