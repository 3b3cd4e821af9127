"""Local Outlier Factor over Euclidean feature space.

Definitions (with MinPts written ``k``):

* ``k-distance(p)``: distance to the k-th nearest other point, ties counted.
* ``N(p)``: every other point within ``k-distance(p)`` (so ``|N(p)|`` may
  exceed ``k`` on ties).
* ``reach(p, o) = max(k-distance(o), d(p, o))``.
* ``lrd(p)`` is the inverse mean reach distance over ``N(p)``; the score of
  ``p`` is the mean of ``lrd(o) / lrd(p)`` over its neighborhood, ~1 deep
  inside homogeneous regions.

Firewall logs encode to heavily duplicated points, which the textbook
formula answers with infinite densities. Scores here stay finite:

* A point whose whole neighborhood sits at distance 0 (at least ``k``
  duplicates) scores exactly 1.
* When such a pile appears in someone else's neighborhood, its density is
  taken over the neighborhood expanded to the k-th nearest *distinct*
  location, which is the duplicate remedy of the original formulation.

Everything runs on distinct coordinate rows weighted by multiplicity; the
brute-force per-point definition gives identical results and is what the
test suite checks against. Two interchangeable backends exist: a compiled
OpenMP kernel and a chunked numpy implementation, selected at import (the
compiled one when available, numpy otherwise; ``FIRELOG_PURE=1`` forces
numpy). Both accumulate squared differences dimension-by-dimension in the
same order, so neighborhood tie decisions agree bit-for-bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .._native import native_lof_distinct
from ..errors import KOutOfRangeError
from .features import FeatureMatrix

DEFAULT_K = 20
DEFAULT_THRESHOLD = 1.5

# rows per distance block; keeps transient buffers near 128 MB at 50k points
_BLOCK_CELLS = 16_000_000


@dataclass(frozen=True)
class LofParams:
    k: int = DEFAULT_K
    metric: str = "euclidean"

    def __post_init__(self):
        if self.k < 1:
            raise KOutOfRangeError(f"k must be >= 1, got {self.k}")
        if self.metric != "euclidean":
            raise KOutOfRangeError(f"unsupported metric: {self.metric}")


@dataclass(frozen=True)
class LofScores:
    scores: np.ndarray  # (n,) float64, finite, >= 0


def _dist_block(block: np.ndarray, points: np.ndarray, out: np.ndarray,
                scratch: np.ndarray) -> np.ndarray:
    """Euclidean distances block x points, accumulated per dimension in a
    fixed order (bit-compatible with the compiled kernel)."""
    b, m = out.shape
    out[:] = 0.0
    for j in range(points.shape[1]):
        np.subtract(block[:, j, None], points[None, :, j], out=scratch)
        np.multiply(scratch, scratch, out=scratch)
        out += scratch
    return np.sqrt(out, out=out)


def lof_distinct_numpy(distinct: np.ndarray, counts: np.ndarray, k: int) -> np.ndarray:
    """Numpy backend: scores per distinct location (see module docstring)."""
    m, d = distinct.shape
    if m == 1:
        return np.ones(1)
    counts = counts.astype(np.int64)
    fcounts = counts.astype(np.float64)
    kprime = k - (counts - 1)  # how many non-duplicate points kdist needs
    pile = kprime <= 0

    block = max(1, min(m, _BLOCK_CELLS // m))
    dist = np.empty((block, m))
    scratch = np.empty((block, m))
    kth = min(k, m - 1)

    kdist = np.zeros(m)
    for i0 in range(0, m, block):
        i1 = min(i0 + block, m)
        rows = slice(0, i1 - i0)
        dblk = _dist_block(distinct[i0:i1], distinct, dist[rows], scratch[rows])
        dblk[np.arange(i1 - i0), np.arange(i0, i1)] = np.inf  # exclude self
        idx = np.argpartition(dblk, kth - 1, axis=1)[:, :kth]
        dsel = np.take_along_axis(dblk, idx, axis=1)
        order = np.argsort(dsel, axis=1)
        dsel = np.take_along_axis(dsel, order, axis=1)
        csel = np.take_along_axis(counts[idx], order, axis=1)
        need = np.maximum(kprime[i0:i1], 1)
        pos = np.argmax(np.cumsum(csel, axis=1) >= need[:, None], axis=1)
        kd = dsel[np.arange(i1 - i0), pos]
        kd[pile[i0:i1]] = 0.0
        kdist[i0:i1] = kd

    mean_reach = np.zeros(m)
    weight = np.zeros(m)
    for i0 in range(0, m, block):
        i1 = min(i0 + block, m)
        rows = slice(0, i1 - i0)
        dblk = _dist_block(distinct[i0:i1], distinct, dist[rows], scratch[rows])
        mask = dblk <= kdist[i0:i1, None]  # self included: stands for duplicates
        np.maximum(dblk, kdist[None, :], out=scratch[rows])
        wsum = (mask * fcounts).sum(axis=1) - 1.0  # minus the point itself
        rsum = (mask * scratch[rows] * fcounts).sum(axis=1) - kdist[i0:i1]
        weight[i0:i1] = wsum
        mean_reach[i0:i1] = rsum / wsum

    mean_reach[pile] = 0.0
    effective = mean_reach.copy()
    for i in np.flatnonzero(mean_reach == 0.0):
        drow = _dist_block(distinct[i:i + 1], distinct,
                           dist[:1], scratch[:1])[0].copy()
        drow[i] = np.inf
        radius = np.partition(drow, kth - 1)[kth - 1]
        nb = drow <= radius
        w = fcounts[nb].sum() + (fcounts[i] - 1.0)
        r = (fcounts[nb] * np.maximum(kdist[nb], drow[nb])).sum()
        effective[i] = r / w

    inv_density = 1.0 / effective
    scores = np.ones(m)
    for i0 in range(0, m, block):
        i1 = min(i0 + block, m)
        rows = slice(0, i1 - i0)
        dblk = _dist_block(distinct[i0:i1], distinct, dist[rows], scratch[rows])
        mask = dblk <= kdist[i0:i1, None]
        s = (mask * inv_density * fcounts).sum(axis=1) - inv_density[i0:i1]
        lof = mean_reach[i0:i1] * s / weight[i0:i1]
        scores[i0:i1] = np.where(pile[i0:i1], 1.0, lof)
    return scores


if os.environ.get("FIRELOG_PURE"):
    ACTIVE_BACKEND = "numpy"
    _lof_distinct = lof_distinct_numpy
elif native_lof_distinct is not None:
    ACTIVE_BACKEND = "native"
    _lof_distinct = native_lof_distinct
else:
    ACTIVE_BACKEND = "numpy"
    _lof_distinct = lof_distinct_numpy


def lof_scores(points: np.ndarray, k: int, backend: str | None = None) -> np.ndarray:
    """Score every row of ``points``; requires ``1 <= k < n``."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise KOutOfRangeError("points must be a 2-D array")
    n = points.shape[0]
    if not 1 <= k < n:
        raise KOutOfRangeError(f"k must satisfy 1 <= k < n={n}, got {k}")
    impl = _lof_distinct
    if backend == "numpy":
        impl = lof_distinct_numpy
    elif backend == "native":
        if native_lof_distinct is None:
            raise RuntimeError("native kernel not built")
        impl = native_lof_distinct
    distinct, inverse, counts = np.unique(points, axis=0, return_inverse=True,
                                          return_counts=True)
    distinct = np.ascontiguousarray(distinct)
    scores = np.asarray(impl(distinct, counts.astype(np.int64), int(k)))
    return scores[inverse.reshape(-1)]


def lof(matrix: FeatureMatrix, params: LofParams | None = None) -> LofScores:
    params = params or LofParams()
    return LofScores(lof_scores(matrix.points, params.k))


def clip_k(k: int, n: int) -> int:
    """Interactive default: requested neighborhood size clipped to n-1."""
    return max(1, min(k, n - 1))
