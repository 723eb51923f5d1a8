"""Rank-based dependence tools: pseudo-observations and Kendall's tau-b."""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.stats import rankdata

from .errors import DataError

__all__ = ["to_pseudo_obs", "kendall_tau", "count_inversions"]


def to_pseudo_obs(data) -> np.ndarray:
    """Column-wise average ranks divided by ``n + 1``.

    Raises:
        DataError: on fewer than two rows or any non-finite entry.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DataError(f"expected an n x d matrix, got {x.ndim} dimensions")
    n = x.shape[0]
    if n < 2:
        raise DataError(f"need at least 2 rows, got {n}")
    bad = ~np.isfinite(x)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DataError(f"non-finite value {x[row, col]!r} at row {row}, column {col}")
    return rankdata(x, method="average", axis=0) / (n + 1.0)


@njit(cache=True)
def _merge_count(a, buf, lo, hi):
    # sorts a[lo:hi] in place, returns the number of strict inversions
    if hi - lo < 2:
        return 0
    mid = (lo + hi) // 2
    swaps = _merge_count(a, buf, lo, mid) + _merge_count(a, buf, mid, hi)
    i, j, k = lo, mid, lo
    while i < mid and j < hi:
        if a[j] < a[i]:
            buf[k] = a[j]
            swaps += mid - i
            j += 1
        else:
            buf[k] = a[i]
            i += 1
        k += 1
    while i < mid:
        buf[k] = a[i]
        i += 1
        k += 1
    while j < hi:
        buf[k] = a[j]
        j += 1
        k += 1
    for t in range(lo, hi):
        a[t] = buf[t]
    return swaps


def count_inversions(seq) -> int:
    """Number of pairs ``i < j`` with ``seq[i] > seq[j]`` (ties are not inversions)."""
    a = np.array(seq, dtype=np.float64)
    return int(_merge_count(a, np.empty_like(a), 0, a.shape[0]))


def _tied_pairs(sorted_vals: np.ndarray) -> int:
    # pairs sharing a value, for an already sorted 1-d array
    if sorted_vals.size == 0:
        return 0
    edges = np.flatnonzero(np.diff(sorted_vals) != 0)
    counts = np.diff(np.concatenate(([0], edges + 1, [sorted_vals.size])))
    return int(np.sum(counts * (counts - 1) // 2))


def kendall_tau(x, y) -> float:
    """Tie-corrected Kendall's tau-b in O(n log n).

    Pairs are sorted by ``(x, y)``; discordant pairs are then the inversions
    left in the ``y`` sequence, counted by merge sort.

    Raises:
        DataError: if the vectors differ in length, have fewer than two
            entries, or either is constant (tau undefined).
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if y.size != n:
        raise DataError(f"length mismatch: {n} vs {y.size}")
    if n < 2:
        raise DataError(f"kendall_tau needs at least 2 observations, got {n}")
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    n0 = n * (n - 1) // 2
    n1 = _tied_pairs(xs)
    # joint ties: consecutive runs equal in both coordinates
    same = np.concatenate(([False], (np.diff(xs) == 0) & (np.diff(ys) == 0)))
    run_id = np.cumsum(~same)
    counts = np.bincount(run_id)
    n3 = int(np.sum(counts * (counts - 1) // 2))
    ys_work = ys.copy()
    swaps = int(_merge_count(ys_work, np.empty_like(ys_work), 0, n))
    n2 = _tied_pairs(ys_work)
    if n1 == n0 or n2 == n0:
        raise DataError("kendall_tau is undefined for a constant vector")
    num = n0 - n1 - n2 + n3 - 2 * swaps
    tau = num / np.sqrt(float(n0 - n1) * float(n0 - n2))
    return float(min(1.0, max(-1.0, tau)))
