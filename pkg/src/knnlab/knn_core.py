"""k-nearest-neighbor regression with exact index tie-breaking.

Neighbors of a query x are the data points sorted by squared Euclidean
distance, ties resolved by the smaller original row index. Two query
engines produce that ordering: a numpy brute-force scan and a kd-tree
whose candidate heap is keyed on ``(sqdist, index)``. The tree prunes a
node only when its box is *strictly* farther than the current k-th
candidate, so equidistant lower-index points are never skipped and both
engines return identical index arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np
from numpy.typing import ArrayLike, NDArray

from knnlab.sampler import Dataset

LEAF_SIZE = 16
BRUTE_MAX_N = 512
BRUTE_MIN_D = 8
_BRUTE_BLOCK = 1 << 22  # distance-matrix entries per chunk


class NotFittedError(RuntimeError):
    pass


def k_schedule(p: float, d: int, n: int) -> int:
    """``max(1, floor(n^(2p/(2p+d))))`` clamped to n, floored exactly.

    The exponent is taken as a rational so exact powers (``256^(3/4) = 64``)
    are not lost to float rounding.
    """
    if p <= 0 or d < 1 or n < 1:
        raise ValueError("need p > 0, d >= 1, n >= 1")
    expo = Fraction(2) * Fraction(p).limit_denominator(10_000)
    expo = expo / (expo + d)
    return min(n, max(1, _floor_rational_power(n, expo)))


def k_exponent(n: int, exponent: float) -> int:
    """``max(1, floor(n^exponent))`` clamped to n."""
    expo = Fraction(exponent).limit_denominator(10_000)
    return min(n, max(1, _floor_rational_power(n, expo)))


def _floor_rational_power(n: int, expo: Fraction) -> int:
    a, b = expo.numerator, expo.denominator
    target = n ** a
    k = int(math.floor(n ** float(expo)))
    while k > 0 and k ** b > target:
        k -= 1
    while (k + 1) ** b <= target:
        k += 1
    return k


# --------------------------------------------------------------------------
# brute force


def sq_distances(xs: NDArray[np.float64], queries: NDArray[np.float64]) -> NDArray[np.float64]:
    """(Q, n) squared distances, summed axis by axis in a fixed order."""
    acc = np.zeros((queries.shape[0], xs.shape[0]))
    for a in range(xs.shape[1]):
        diff = xs[:, a][None, :] - queries[:, a][:, None]
        acc += diff * diff
    return acc


def brute_neighbors(xs: NDArray[np.float64], queries: NDArray[np.float64], k: int) -> NDArray[np.int64]:
    """(Q, k) neighbor indices by full scan; row order is ``(sqdist, index)``."""
    n = xs.shape[0]
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    step = max(1, _BRUTE_BLOCK // max(n, 1))
    for lo in range(0, queries.shape[0], step):
        dist = sq_distances(xs, queries[lo:lo + step])
        if k < n:
            kth = np.partition(dist, k - 1, axis=1)[:, k - 1]
        else:
            kth = dist.max(axis=1)
        for r in range(dist.shape[0]):
            row = dist[r]
            cand = np.flatnonzero(row <= kth[r])
            order = np.argsort(row[cand], kind="stable")
            out[lo + r] = cand[order[:k]]
    return out


# --------------------------------------------------------------------------
# kd-tree


@dataclass(frozen=True)
class KDTree:
    points: NDArray[np.float64]  # rows reordered so each node is a contiguous slice
    perm: NDArray[np.int64]  # original row index of each reordered point
    start: NDArray[np.int64]
    end: NDArray[np.int64]
    left: NDArray[np.int64]  # -1 marks a leaf
    right: NDArray[np.int64]
    lo: NDArray[np.float64]  # tight bounding box per node
    hi: NDArray[np.float64]
    depth: int


def build_kdtree(xs: NDArray[np.float64], leaf_size: int = LEAF_SIZE) -> KDTree:
    """Median split on the widest axis until nodes hold ``<= leaf_size`` points."""
    n, d = xs.shape
    perm = np.arange(n, dtype=np.int64)
    start, end, left, right, lo, hi = [], [], [], [], [], []
    max_depth = 0

    def grow(s: int, e: int, depth: int) -> int:
        nonlocal max_depth
        max_depth = max(max_depth, depth)
        node = len(start)
        block = xs[perm[s:e]]
        blo, bhi = block.min(axis=0), block.max(axis=0)
        start.append(s)
        end.append(e)
        left.append(-1)
        right.append(-1)
        lo.append(blo)
        hi.append(bhi)
        spread = bhi - blo
        if e - s <= leaf_size or not np.any(spread > 0):
            return node
        axis = int(np.argmax(spread))
        mid = (s + e) // 2
        sub = perm[s:e]
        perm[s:e] = sub[np.argpartition(xs[sub, axis], mid - s)]
        left[node] = grow(s, mid, depth + 1)
        right[node] = grow(mid, e, depth + 1)
        return node

    grow(0, n, 0)
    return KDTree(
        points=np.ascontiguousarray(xs[perm]),
        perm=perm,
        start=np.asarray(start, dtype=np.int64),
        end=np.asarray(end, dtype=np.int64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        lo=np.ascontiguousarray(np.asarray(lo, dtype=np.float64).reshape(-1, d)),
        hi=np.ascontiguousarray(np.asarray(hi, dtype=np.float64).reshape(-1, d)),
        depth=max_depth,
    )


@numba.njit(cache=True, nogil=True)
def _box_sqdist(q, lo, hi):
    acc = 0.0
    for a in range(q.shape[0]):
        if q[a] < lo[a]:
            diff = lo[a] - q[a]
        elif q[a] > hi[a]:
            diff = q[a] - hi[a]
        else:
            diff = 0.0
        acc += diff * diff
    return acc


@numba.njit(cache=True, nogil=True)
def _before(da, ia, db, ib):
    return da < db or (da == db and ia < ib)


@numba.njit(cache=True, nogil=True)
def _sift_down(hd, hi_, size, pos):
    # max-heap on (dist, index)
    while True:
        c = 2 * pos + 1
        if c >= size:
            return
        if c + 1 < size and _before(hd[c], hi_[c], hd[c + 1], hi_[c + 1]):
            c += 1
        if _before(hd[pos], hi_[pos], hd[c], hi_[c]):
            hd[pos], hd[c] = hd[c], hd[pos]
            hi_[pos], hi_[c] = hi_[c], hi_[pos]
            pos = c
        else:
            return


@numba.njit(cache=True, nogil=True)
def _sift_up(hd, hi_, pos):
    while pos > 0:
        parent = (pos - 1) // 2
        if _before(hd[parent], hi_[parent], hd[pos], hi_[pos]):
            hd[pos], hd[parent] = hd[parent], hd[pos]
            hi_[pos], hi_[parent] = hi_[parent], hi_[pos]
            pos = parent
        else:
            return


@numba.njit(cache=True, nogil=True)
def _tree_query(points, perm, start, end, left, right, lo, hi, depth, queries, k):
    nq, d = queries.shape
    out = np.empty((nq, k), dtype=np.int64)
    hd = np.empty(k, dtype=np.float64)
    hix = np.empty(k, dtype=np.int64)
    stack = np.empty(2 * depth + 4, dtype=np.int64)
    for qi in range(nq):
        q = queries[qi]
        size = 0
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            if size == k and _box_sqdist(q, lo[node], hi[node]) > hd[0]:
                continue
            if left[node] < 0:
                for j in range(start[node], end[node]):
                    acc = 0.0
                    for a in range(d):
                        diff = points[j, a] - q[a]
                        acc += diff * diff
                    idx = perm[j]
                    if size < k:
                        hd[size] = acc
                        hix[size] = idx
                        _sift_up(hd, hix, size)
                        size += 1
                    elif _before(acc, idx, hd[0], hix[0]):
                        hd[0] = acc
                        hix[0] = idx
                        _sift_down(hd, hix, size, 0)
                continue
            l, r = left[node], right[node]
            dl = _box_sqdist(q, lo[l], hi[l])
            dr = _box_sqdist(q, lo[r], hi[r])
            if dl <= dr:
                stack[top] = r
                stack[top + 1] = l
            else:
                stack[top] = l
                stack[top + 1] = r
            top += 2
        # heap-sort the candidates into ascending (dist, index) order
        for m in range(size - 1, -1, -1):
            out[qi, m] = hix[0]
            hd[0] = hd[m]
            hix[0] = hix[m]
            _sift_down(hd, hix, m, 0)
    return out


def tree_neighbors(tree: KDTree, queries: NDArray[np.float64], k: int) -> NDArray[np.int64]:
    """(Q, k) neighbor indices from the kd-tree; same contract as :func:`brute_neighbors`."""
    return _tree_query(
        tree.points, tree.perm, tree.start, tree.end, tree.left, tree.right,
        tree.lo, tree.hi, tree.depth, np.ascontiguousarray(queries, dtype=np.float64), k,
    )


# --------------------------------------------------------------------------
# estimator


@dataclass(frozen=True)
class NeighborOrdering:
    """Prefix of the tie-broken ordering of the data around ``query``."""

    query: NDArray[np.float64]
    order: NDArray[np.int64]


class KnnRegressor:
    """The k-NN mean estimator over a fixed dataset.

    ``index`` is ``"auto"`` (tree unless ``n <= 512`` or ``d >= 8``),
    ``"tree"`` or ``"brute"``.
    """

    def __init__(self, data: Dataset | None = None, *, index: str = "auto", leaf_size: int = LEAF_SIZE):
        if index not in ("auto", "tree", "brute"):
            raise ValueError(f"unknown index {index!r}")
        self.index = index
        self.leaf_size = leaf_size
        self.xs: NDArray[np.float64] | None = None
        self.ys: NDArray[np.float64] | None = None
        self.tree: KDTree | None = None
        if data is not None:
            self.fit(data.xs, data.ys)

    def fit(self, xs: ArrayLike, ys: ArrayLike) -> "KnnRegressor":
        xs = np.ascontiguousarray(xs, dtype=np.float64)
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        ys = np.ascontiguousarray(ys, dtype=np.float64)
        if xs.shape[0] != ys.shape[0] or xs.shape[0] == 0:
            raise ValueError("need n >= 1 points with one response each")
        self.xs, self.ys = xs, ys
        n, d = xs.shape
        use_tree = self.index == "tree" or (self.index == "auto" and n > BRUTE_MAX_N and d < BRUTE_MIN_D)
        self.tree = build_kdtree(xs, self.leaf_size) if use_tree else None
        return self

    @property
    def n(self) -> int:
        return 0 if self.xs is None else self.xs.shape[0]

    def _queries(self, x: ArrayLike) -> tuple[NDArray[np.float64], bool]:
        if self.xs is None:
            raise NotFittedError("model has no data")
        d = self.xs.shape[1]
        q = np.asarray(x, dtype=np.float64)
        single = q.ndim == 0 or (q.ndim == 1 and q.shape[0] == d)
        if single:
            q = q.reshape(1, d)
        elif q.ndim == 1 and d == 1:
            q = q.reshape(-1, 1)
        if q.ndim != 2 or q.shape[1] != d:
            raise ValueError(f"queries must have dimension {d}")
        return np.ascontiguousarray(q), single

    def _check_k(self, k: int) -> None:
        if not 1 <= k <= self.n:
            raise ValueError(f"k must satisfy 1 <= k <= n = {self.n}, got {k}")

    def kneighbors(self, x: ArrayLike, k: int, *, engine: str | None = None) -> NDArray[np.int64]:
        """(Q, k) neighbor indices for a batch of queries."""
        q, _ = self._queries(x)
        self._check_k(k)
        engine = engine or ("tree" if self.tree is not None else "brute")
        if engine == "tree":
            tree = self.tree if self.tree is not None else build_kdtree(self.xs, self.leaf_size)
            return tree_neighbors(tree, q, k)
        return brute_neighbors(self.xs, q, k)

    def neighbors(self, x: ArrayLike, k: int, *, engine: str | None = None) -> NeighborOrdering:
        q, _ = self._queries(x)
        if q.shape[0] != 1:
            raise ValueError("neighbors takes a single query point; use kneighbors for batches")
        return NeighborOrdering(q[0], self.kneighbors(q, k, engine=engine)[0])

    def predict(self, x: ArrayLike, k: int, *, engine: str | None = None) -> float | NDArray[np.float64]:
        """Mean response of the k nearest points (float for one query, array for a batch)."""
        _, single = self._queries(x)
        idx = self.kneighbors(x, k, engine=engine)
        pred = self.ys[idx].sum(axis=1) / k
        return float(pred[0]) if single else pred


def batched_neighbors(points: NDArray[np.float64], queries: NDArray[np.float64], k: int) -> NDArray[np.int64]:
    """Neighbors for R independent small problems at once.

    ``points`` is (R, n, d), ``queries`` is (R, d); returns (R, k) indices
    into each problem's rows, ordered by ``(sqdist, index)``.
    """
    acc = np.zeros(points.shape[:2])
    for a in range(points.shape[2]):
        diff = points[:, :, a] - queries[:, a][:, None]
        acc += diff * diff
    return np.argsort(acc, axis=1, kind="stable")[:, :k]
