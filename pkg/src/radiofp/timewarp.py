"""Dynamic time warping distances and per-link similarity matrices."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .domain import Dataset


@numba.njit(cache=True, nogil=True)
def _dtw_dp(a, b, band):  # band < 0 means unconstrained
    n = a.shape[0]
    m = b.shape[0]
    prev = np.full(m, np.inf)
    curr = np.full(m, np.inf)
    for i in range(n):
        if band < 0:
            lo, hi = 0, m
        else:
            lo = max(0, i - band)
            hi = min(m, i + band + 1)
        for j in range(lo, hi):
            cost = abs(a[i] - b[j])
            if i == 0 and j == 0:
                curr[j] = cost
                continue
            best = np.inf
            if i > 0 and j > 0 and prev[j - 1] < best:
                best = prev[j - 1]
            if i > 0 and prev[j] < best:
                best = prev[j]
            if j > 0 and curr[j - 1] < best:
                best = curr[j - 1]
            curr[j] = cost + best
        prev, curr = curr, prev
        curr[:] = np.inf
    return prev[m - 1]


def dtw(a, b, band: int | None = None) -> float:
    """DTW distance with absolute-difference local cost.

    Classic dynamic program over the |a| x |b| grid with match / insert /
    delete steps, each adding the full local cost; the (1,1) cell is
    |a[0] - b[0]|. ``band`` restricts the alignment to |i - j| <= band
    (must be at least the length difference).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0 or b.size == 0:
        raise ValueError("dtw requires two nonempty 1-D series")
    if band is not None:
        if band < abs(a.size - b.size):
            raise ValueError("band narrower than the series length difference")
        return float(_dtw_dp(a, b, band))
    return float(_dtw_dp(a, b, -1))


def standardized_dtw_matrix(
    dataset: Dataset,
    link: int,
    band: int | None = None,
    center: bool = True,
    jobs: int = 1,
) -> np.ndarray:
    """Pairwise DTW distances over one link's series, standardized.

    With ``center=True`` (default) the off-diagonal population is z-scored
    to mean 0 / std 1 and the diagonal carries the standardized value of a
    raw 0 distance; with ``center=False`` distances are only divided by the
    off-diagonal std, keeping everything nonnegative. A degenerate std
    (all off-diagonal distances equal) maps everything to 0. ``jobs``
    computes pairs in parallel threads; the result does not depend on it.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("standardized DTW needs at least 2 records")
    series = [np.ascontiguousarray(rec.link(link)) for rec in dataset]
    raw = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            distances = list(pool.map(lambda p: dtw(series[p[0]], series[p[1]], band=band), pairs))
    else:
        distances = [dtw(series[i], series[j], band=band) for i, j in pairs]
    for (i, j), value in zip(pairs, distances):
        raw[i, j] = raw[j, i] = value
    off_diag = raw[~np.eye(n, dtype=bool)]
    mean = off_diag.mean() if center else 0.0
    std = off_diag.std()
    if std == 0.0:
        return np.zeros((n, n))
    return (raw - mean) / std


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric record-by-record similarity; diagonal entries maximal."""

    values: np.ndarray
    ids: tuple = ()  # record order, typically class-blockwise


def similarity(standardized, ids=()) -> SimilarityMatrix:
    """exp(-x) applied element-wise to a standardized distance matrix."""
    standardized = np.asarray(standardized, dtype=np.float64)
    if not np.isfinite(standardized).all():
        raise ValueError("standardized matrix must be finite")
    return SimilarityMatrix(values=np.exp(-standardized), ids=tuple(ids))
