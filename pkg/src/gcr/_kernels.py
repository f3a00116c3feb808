"""Compiled inner loops for tube scans and the greedy pairing.

Membership uses the division-free form of the tube test
``0 <= <p - a, w> <= |w|^2`` and ``|p - a|^2 |w|^2 - <p - a, w>^2 <= r^2 |w|^2``
with ``w = b - a``. Endpoints are members by definition. Variances are
two-pass over the members taken in increasing sample index.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _dots(offT, hi, w, dots):
    D = offT.shape[0]
    for t in range(hi):
        dots[t] = 0.0
    for c in range(D):
        wc = w[c]
        row = offT[c]
        for t in range(hi):
            dots[t] += row[t] * wc


@njit(cache=True)
def _members(offT, sq, perm, hi, w, ww, ia, ib, r2, out, dots):
    """Collect tube members among the first ``hi`` points of ``perm``.

    Column ``t`` of ``offT`` and entry ``t`` of ``sq`` hold the offset from
    ``a`` of sample ``perm[t]`` and its squared norm. Returns the member
    count; ``out[:m]`` holds the sample indices in increasing order.
    """
    _dots(offT, hi, w, dots)
    m = 0
    if ww == 0.0:
        for t in range(hi):
            out[m] = perm[t]
            m += sq[t] <= r2
    else:
        rr = r2 * ww
        for t in range(hi):
            dot = dots[t]
            out[m] = perm[t]
            m += (dot >= 0.0) & (dot <= ww) & (sq[t] * ww - dot * dot <= rr)
    # endpoints belong to the tube by definition; add them if rounding dropped one
    has_a = False
    has_b = False
    for t in range(m):
        has_a |= out[t] == ia
        has_b |= out[t] == ib
    if not has_a:
        out[m] = ia
        m += 1
    if not has_b:
        out[m] = ib
        m += 1
    out[:m].sort()
    return m


@njit(cache=True)
def _variance_of(y, idx, m):
    if m < 2:
        return np.inf
    s = 0.0
    for t in range(m):
        s += y[idx[t]]
    mean = s / m
    ss = 0.0
    for t in range(m):
        dv = y[idx[t]] - mean
        ss += dv * dv
    return ss / (m - 1)


@njit(cache=True)
def pair_tube_stats(X, y, i, j, r):
    """Occupancy and variance for the tube from ``X[i]`` to ``X[j]``."""
    n, D = X.shape
    off = np.empty((n, D))
    sq = np.empty(n)
    for k in range(n):
        acc = 0.0
        for c in range(D):
            v = X[k, c] - X[i, c]
            off[k, c] = v
            acc += v * v
        sq[k] = acc
    perm = np.arange(n)
    out = np.empty(n, dtype=np.int64)
    m = _members(np.ascontiguousarray(off.T), sq, perm, n, off[j].copy(), sq[j], i, j, r * r, out, np.empty(n))
    return m, _variance_of(y, out, m), out[:m].copy()


@njit(cache=True)
def greedy_connect(X, y, order, alpha, r, cap):
    """Disjoint greedy pairing; returns ``(pairs, n_pairs, n_evaluations)``.

    ``cap <= 0`` means no limit on candidates per leader.
    """
    n, D = X.shape
    r2 = r * r
    alive = np.ones(n, dtype=np.bool_)
    pairs = np.empty((n // 2, 2), dtype=np.int64)
    n_pairs = 0
    n_eval = 0
    off = np.empty((n, D))
    sq = np.empty(n)
    out = np.empty(n, dtype=np.int64)
    w = np.empty(D)
    dots = np.empty(n)
    for pos in range(n - 1):
        a = order[pos]
        if not alive[a]:
            continue
        for k in range(n):
            acc = 0.0
            for c in range(D):
                v = X[k, c] - X[a, c]
                off[k, c] = v
                acc += v * v
            sq[k] = acc
        perm = np.argsort(sq, kind="mergesort")
        sq_sorted = sq[perm]
        offT = np.ascontiguousarray(off[perm].T)
        partner = -1
        tried = 0
        for q in range(pos + 1, n):
            b = order[q]
            if not alive[b]:
                continue
            if cap > 0 and tried >= cap:
                break
            tried += 1
            for c in range(D):
                w[c] = off[b, c]
            ww = sq[b]
            # members satisfy |p - a|^2 <= |w|^2 + r^2
            hi = np.searchsorted(sq_sorted, ww + r2 + 1e-12 * (ww + r2), side="right")
            m = _members(offT, sq_sorted, perm, hi, w, ww, a, b, r2, out, dots)
            if _variance_of(y, out, m) <= alpha:
                partner = b
                break
        n_eval += tried
        alive[a] = False
        if partner >= 0:
            alive[partner] = False
            pairs[n_pairs, 0] = a
            pairs[n_pairs, 1] = partner
            n_pairs += 1
    return pairs[:n_pairs].copy(), n_pairs, n_eval
