"""Beta/Gamma identities and Monte Carlo checks of nearest-neighbor moments.

``nn_moment`` estimates the average ``2*gamma``-th power of the distance
from a uniform query to its k nearest sample points; ``cross_term``
estimates the off-diagonal sum ``sum_{i != j} (X_i - X)_s (X_j - X)_s``
over those neighbors two ways, by literal simulation and as a weighted
integral over one ordering region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.typing import NDArray

from knnlab.knn_core import KnnRegressor, batched_neighbors
from knnlab.sampler import stream
from knnlab.smooth_model import DomainError

EXACT_BETA_MAX = 256


def beta_fn(alpha: float, beta: int) -> float:
    """``B(alpha, beta) = (beta-1)! / (alpha (alpha+1) ... (alpha+beta-1))`` for integer beta.

    Small ``beta`` is evaluated in exact rational arithmetic (the result is
    correctly rounded); large ``beta`` goes through ``lgamma``.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if int(beta) != beta or beta < 1:
        raise DomainError("beta must be a positive integer")
    beta = int(beta)
    if beta <= EXACT_BETA_MAX:
        a = Fraction(alpha)
        den = Fraction(1)
        for j in range(beta):
            den *= a + j
        return float(math.factorial(beta - 1) / den)
    return math.exp(math.lgamma(beta) + math.lgamma(alpha) - math.lgamma(alpha + beta))


def stirling_ratio(n: int, d: int) -> float:
    """``n! / ((1 + 3/d)(2 + 3/d) ... (n + 3/d))``.

    Exact when ``3/d`` is an integer m (the product telescopes to
    ``1 / C(n+m, m)``), log-Gamma otherwise.
    """
    if n < 1 or d < 1:
        raise DomainError("need n >= 1 and d >= 1")
    if 3 % d == 0:
        return float(Fraction(1, math.comb(n + 3 // d, 3 // d)))
    a = 3 / d
    return math.exp(math.lgamma(n + 1) + math.lgamma(1 + a) - math.lgamma(n + 1 + a))


def stirling_limit(d: int) -> float:
    """``Gamma(1 + 3/d)``, the limit of ``n^(3/d) * stirling_ratio(n, d)``."""
    return math.gamma(1 + 3 / d)


@dataclass(frozen=True)
class MomentEstimate:
    gamma: float
    n: int
    k: int
    d: int
    value: float
    stderr: float
    scale: float  # (k/n)^(2 gamma/d)

    @property
    def ratio(self) -> float:
        return self.value / self.scale

    def bound(self, c1: float) -> float:
        return c1 * self.scale


def nn_moment(gamma: float, n: int, k: int, d: int, reps: int, seed: int) -> MomentEstimate:
    """Monte Carlo ``(1/k) E sum_{i<=k} |X_(i,X) - X|^(2 gamma)`` with uniform X and sample."""
    if not 1 <= k <= n:
        raise DomainError("need 1 <= k <= n")
    if reps < 100:
        raise DomainError("reps must be >= 100")
    vals = np.empty(reps)
    for rep in range(reps):
        rng = stream(seed, rep)
        x = rng.random((1, d))
        xs = rng.random((n, d))
        idx = KnnRegressor(index="brute").fit(xs, np.zeros(n)).kneighbors(x, k)[0]
        sq = np.sum((xs[idx] - x) ** 2, axis=1)
        vals[rep] = np.mean(sq ** gamma)
    return MomentEstimate(
        gamma=gamma, n=n, k=k, d=d,
        value=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / math.sqrt(reps)),
        scale=(k / n) ** (2 * gamma / d),
    )


@dataclass(frozen=True)
class CrossTerm:
    direct: float
    direct_se: float
    conditioned: float
    conditioned_se: float

    @property
    def z(self) -> float:
        se = math.hypot(self.direct_se, self.conditioned_se)
        return abs(self.direct - self.conditioned) / se if se > 0 else 0.0


def _offdiag(a: NDArray[np.float64]) -> NDArray[np.float64]:
    # sum_{i != j} a_i a_j along the last axis
    return a.sum(axis=-1) ** 2 - (a * a).sum(axis=-1)


def region_weight(n: int, k: int) -> float:
    """``n (n-1) ... (n-k) / k!``: the number of (near set, boundary point) labelings."""
    return float(Fraction(math.prod(range(n - k, n + 1)), math.factorial(k)))


def cross_term(n: int, k: int, d: int, axis: int, reps: int, seed: int, chunk: int = 50_000) -> CrossTerm:
    """Off-diagonal neighbor cross term along ``axis`` (0-based), estimated twice.

    ``direct`` simulates the sample, finds the k nearest points to a
    uniform query and sums the off-diagonal products. ``conditioned``
    integrates the same sum over the region where points ``1..k`` are the
    k nearest and point ``k+1`` is next: the query and point ``k+1`` are
    uniform, points ``1..k`` are proposed uniformly in the cube-clipped
    bounding box of the ball through point ``k+1`` (weight ``vol(box)^k``,
    kept only if all fall strictly inside the ball), and
    the remaining points are uniform and accepted only if all are strictly
    farther. The result is scaled by :func:`region_weight`.
    """
    if not 2 <= k <= n - 1:
        raise DomainError("need 2 <= k <= n - 1")
    if not 0 <= axis < d:
        raise DomainError("axis out of range")
    direct = np.empty(reps)
    cond = np.empty(reps)
    weight = region_weight(n, k)
    for c, lo in enumerate(range(0, reps, chunk)):
        m = min(chunk, reps - lo)
        rng = stream(seed, 0, c)
        x = rng.random((m, d))
        xs = rng.random((m, n, d))
        idx = batched_neighbors(xs, x, k)
        near = np.take_along_axis(xs[:, :, axis], idx, axis=1) - x[:, axis][:, None]
        direct[lo:lo + m] = _offdiag(near)

        rng = stream(seed, 1, c)
        x = rng.random((m, d))
        edge = rng.random((m, d))
        radius = np.sqrt(np.sum((edge - x) ** 2, axis=1))
        box_lo = np.clip(x - radius[:, None], 0, 1)
        box_hi = np.clip(x + radius[:, None], 0, 1)
        box_vol = np.prod(box_hi - box_lo, axis=1)
        pts = box_lo[:, None, :] + (box_hi - box_lo)[:, None, :] * rng.random((m, k, d))
        offs = pts - x[:, None, :]
        r2 = radius[:, None] ** 2
        near_ok = np.all(np.sum(offs ** 2, axis=2) < r2, axis=1)
        far = rng.random((m, n - k - 1, d))
        far_sq = np.sum((far - x[:, None, :]) ** 2, axis=2)
        accepted = near_ok & np.all(far_sq > r2, axis=1)
        cond[lo:lo + m] = np.where(accepted, weight * box_vol ** k * _offdiag(offs[:, :, axis]), 0.0)
    return CrossTerm(
        direct=float(direct.mean()),
        direct_se=float(direct.std(ddof=1) / math.sqrt(reps)),
        conditioned=float(cond.mean()),
        conditioned_se=float(cond.std(ddof=1) / math.sqrt(reps)),
    )


@dataclass(frozen=True)
class CrossRate:
    n: NDArray[np.int64]
    k: NDArray[np.int64]
    T: NDArray[np.float64]
    T_se: NDArray[np.float64]
    slope: float
    intercept: float


def normalized_cross_term(n: int, k: int, d: int, reps: int, seed: int, queries: int = 16) -> tuple[float, float]:
    """``T = k^-2 E sum_s sum_{i != j} (X_(i,X) - X)_s (X_(j,X) - X)_s`` by simulation.

    Each replication draws one sample and ``queries`` uniform query points;
    the stderr is taken over replications.
    """
    vals = np.empty(reps)
    for rep in range(reps):
        rng = stream(seed, rep)
        xs = rng.random((n, d))
        q = rng.random((queries, d))
        idx = KnnRegressor().fit(xs, np.zeros(n)).kneighbors(q, k)
        offs = xs[idx] - q[:, None, :]  # (Q, k, d)
        vals[rep] = np.mean(_offdiag(np.moveaxis(offs, 2, 1)).sum(axis=1)) / k ** 2
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps))


def cross_term_rate(d: int, schedule: list[tuple[int, int]], reps: int, seed: int, queries: int = 16) -> CrossRate:
    """Fit ``log |T|`` against ``log(k/n)`` over a schedule of ``(n, k)``."""
    if len(schedule) < 3:
        raise DomainError("need at least 3 schedule points for a slope")
    ns = [n for n, _ in schedule]
    if ns != sorted(ns):
        raise DomainError("schedule must be sorted by n")
    T = np.empty(len(schedule))
    se = np.empty(len(schedule))
    for i, (n, k) in enumerate(schedule):
        T[i], se[i] = normalized_cross_term(n, k, d, reps, seed + i, queries)
    x = np.log(np.array([k / n for n, k in schedule]))
    # T sits at the noise floor when it is tiny; use |T| there
    slope, intercept = np.polyfit(x, np.log(np.abs(T)), 1)
    return CrossRate(
        n=np.array(ns), k=np.array([k for _, k in schedule]), T=T, T_se=se,
        slope=float(slope), intercept=float(intercept),
    )
