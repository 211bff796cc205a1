"""Ball / unit-cube intersection geometry.

``H(u, v)`` is the closed ball centred at ``u`` through ``v``; ``G(u, v)``
is its intersection with [0, 1]^d. This module provides the constants
attached to those sets, Monte Carlo estimators of their volumes and first
moments, and the closed-form measure ``F(u)`` of centre/witness pairs whose
ball leaves the cube while the clipped volume stays at most ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike, NDArray

from knnlab.sampler import stream
from knnlab.smooth_model import DomainError

_CHUNK_ENTRIES = 1 << 22


@lru_cache(maxsize=None)
def unit_ball_volume(d: int) -> float:
    """``pi^(d/2) / Gamma(d/2 + 1)`` via ``V_d = 2 pi V_(d-2) / d`` (exact for d = 0, 1)."""
    if d < 0:
        raise DomainError("d must be >= 0")
    if d < 2:
        return (1.0, 2.0)[d]
    return 2 * math.pi / d * unit_ball_volume(d - 2)


@dataclass(frozen=True)
class GeometrySpec:
    """Dimension-dependent constants.

    ``e1``: first moment of one coordinate over the positive half of the
    unit ball. ``e2``: unit-ball volume. ``e3``: lower bound on
    ``vol G / vol H``. ``c2``: moment bound ``|int_G (w_s - u_s)| <= c2 vol(G)^((d+1)/d)``.
    ``c3``: density bound ``f(u) <= c3 u^(1/d)``.
    """

    d: int
    e1: float
    e2: float
    e3: float
    c2: float
    c3: float

    @property
    def breakpoint(self) -> float:
        """``e2 / 2^d``: where F switches from the polynomial to the affine branch."""
        return self.e2 / 2 ** self.d


@lru_cache(maxsize=None)
def constants(d: int) -> GeometrySpec:
    if d < 1:
        raise DomainError("d must be >= 1")
    e2 = unit_ball_volume(d)
    # slice at height t is a (d-1)-ball of radius sqrt(1 - t^2); int_0^1 t (1-t^2)^((d-1)/2) dt = 1/(d+1)
    e1 = (unit_ball_volume(d - 1) if d > 1 else 1.0) / (d + 1)
    e3 = min(2.0 ** -d, 2.0 ** (-2 * d) * d ** (-d / 2))
    c2 = 2 * e1 / (e2 * e3) ** ((d + 1) / d)
    bp = e2 / 2 ** d
    slope_sup = sum(abs(a) * bp ** ((d - 1 - i) / d) for i, a in enumerate(_density_coefficients(d)))
    c3 = max(2 / e2 ** (1 / d), slope_sup)
    return GeometrySpec(d=d, e1=e1, e2=e2, e3=e3, c2=c2, c3=c3)


# --------------------------------------------------------------------------
# closed-form F(u) and its density


@lru_cache(maxsize=None)
def _poly_terms(d: int) -> tuple[tuple[Fraction, int], ...]:
    """Rational parts of the small-u branch: pairs (rational coefficient, i).

    F(u) = 2d sum_i coef_i e2^(-(d-i)/d) u^((2d-i)/d) with
    coef_i = C(d-1, i) (-2)^(d-1-i) (1/(d-i) - 1/(2d-i)).
    """
    terms = []
    for i in range(d):
        b = math.comb(d - 1, i) * (-2) ** (d - 1 - i)
        terms.append((b * (Fraction(1, d - i) - Fraction(1, 2 * d - i)), i))
    return tuple(terms)


@lru_cache(maxsize=None)
def _density_coefficients(d: int) -> tuple[float, ...]:
    # f(u) = sum_i a_i u^((d-i)/d)
    e2 = unit_ball_volume(d)
    return tuple((4 * d - 2 * i) * float(c) / e2 ** ((d - i) / d) for c, i in _poly_terms(d))


@lru_cache(maxsize=None)
def half_moment_integral(d: int) -> Fraction:
    """``int_0^(1/2) t^d (1 - 2t)^(d-1) dt`` exactly, by binomial expansion."""
    total = Fraction(0)
    for j in range(d):
        total += math.comb(d - 1, j) * Fraction(-2) ** j * Fraction(1, 2) ** (d + j + 1) / (d + j + 1)
    return total


def _check_u(u: NDArray[np.float64]) -> None:
    if np.any(u < 0) or np.any(u > 1):
        raise DomainError("u must lie in [0, 1]")


def F_small_branch(u: ArrayLike, d: int) -> NDArray[np.float64]:
    """Polynomial branch evaluated anywhere (valid for ``u <= e2 / 2^d``)."""
    u = np.asarray(u, dtype=np.float64)
    e2 = unit_ball_volume(d)
    out = np.zeros_like(u)
    for c, i in _poly_terms(d):
        out = out + 2 * d * float(c) / e2 ** ((d - i) / d) * u ** ((2 * d - i) / d)
    return out


def F_large_branch(u: ArrayLike, d: int) -> NDArray[np.float64]:
    """Affine branch ``u - 2d e2 int_0^(1/2) t^d (1-2t)^(d-1) dt`` (valid for ``u >= e2 / 2^d``)."""
    u = np.asarray(u, dtype=np.float64)
    return u - 2 * d * unit_ball_volume(d) * float(half_moment_integral(d))


def F_closed(u: ArrayLike, d: int) -> float | NDArray[np.float64]:
    """Measure of centre/witness pairs with ``G != H`` and ``vol G <= u``."""
    arr = np.asarray(u, dtype=np.float64)
    _check_u(arr)
    bp = constants(d).breakpoint
    out = np.where(arr <= bp, F_small_branch(np.minimum(arr, bp), d), F_large_branch(arr, d))
    return float(out) if out.ndim == 0 else out


def density(u: ArrayLike, d: int) -> float | NDArray[np.float64]:
    """``f = F'`` on the open branches; 0 at ``0``, ``e2 / 2^d`` and ``1`` by convention."""
    arr = np.asarray(u, dtype=np.float64)
    _check_u(arr)
    bp = constants(d).breakpoint
    small = np.zeros_like(arr)
    for a, (_, i) in zip(_density_coefficients(d), _poly_terms(d)):
        small = small + a * arr ** ((d - i) / d)
    out = np.where(arr < bp, small, 1.0)
    out = np.where((arr == 0) | (arr == bp) | (arr == 1), 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundCheck:
    max_ratio: float
    pass_: bool
    min_value: float = 0.0


def density_bound_check(d: int, grid: int) -> BoundCheck:
    """Check ``0 <= f(u) <= c3 u^(1/d)`` on an interior grid of each branch."""
    if grid < 10:
        raise DomainError("grid must be >= 10")
    spec = constants(d)
    bp = spec.breakpoint
    t = (np.arange(grid) + 0.5) / grid
    pieces = [bp * t]
    if bp < 1:
        pieces.append(bp + (1 - bp) * t)
    u = np.concatenate(pieces)
    u = u[(u > 0) & (u < 1) & (u != bp)]
    f = density(u, d)
    ratio = f / (spec.c3 * u ** (1 / d))
    return BoundCheck(
        max_ratio=float(ratio.max()),
        pass_=bool(np.all(ratio <= 1 + 1e-12) and np.all(f >= 0)),
        min_value=float(f.min()),
    )


# --------------------------------------------------------------------------
# Monte Carlo over balls


@dataclass(frozen=True)
class BallCubePair:
    """Centre ``u`` and witness ``v`` in the cube; the ball has radius ``|u - v|``."""

    center: NDArray[np.float64]
    witness: NDArray[np.float64]

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=np.float64))
        w = np.atleast_1d(np.asarray(self.witness, dtype=np.float64))
        if c.shape != w.shape or c.ndim != 1:
            raise DomainError("centre and witness must be points of the same dimension")
        if np.any(c < 0) or np.any(c > 1) or np.any(w < 0) or np.any(w > 1):
            raise DomainError("both points must lie in [0, 1]^d")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "witness", w)

    @property
    def d(self) -> int:
        return self.center.shape[0]

    @property
    def radius(self) -> float:
        return float(np.sqrt(np.sum((self.center - self.witness) ** 2)))

    @property
    def vol_H(self) -> float:
        return unit_ball_volume(self.d) * self.radius ** self.d


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


def uniform_in_ball(rng: np.random.Generator, shape: tuple[int, ...], d: int) -> NDArray[np.float64]:
    """Uniform points in the unit d-ball: normalised gaussian direction, radius ``U^(1/d)``."""
    z = rng.standard_normal(shape + (d,))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    return z * rng.random(shape + (1,)) ** (1 / d)


@dataclass(frozen=True)
class BallMoments:
    """Per-pair Monte Carlo results for a batch of balls."""

    vol_G: NDArray[np.float64]
    vol_G_se: NDArray[np.float64]
    frac: NDArray[np.float64]  # vol G / vol H
    frac_se: NDArray[np.float64]
    moment: NDArray[np.float64]  # (P, d): int_G (w_s - u_s) dw
    moment_se: NDArray[np.float64]


def ball_moments(
    centers: NDArray[np.float64], radii: NDArray[np.float64], mc_points: int, rng: np.random.Generator
) -> BallMoments:
    """Clipped volume and first moments of many balls by uniform sampling in each ball."""
    P, d = centers.shape
    e2 = unit_ball_volume(d)
    frac = np.empty(P)
    mom = np.empty((P, d))
    mom_sd = np.empty((P, d))
    step = max(1, _CHUNK_ENTRIES // (mc_points * d))
    for lo in range(0, P, step):
        c = centers[lo:lo + step]
        r = radii[lo:lo + step]
        offs = uniform_in_ball(rng, (c.shape[0], mc_points), d) * r[:, None, None]
        pts = c[:, None, :] + offs
        inside = np.all((pts >= 0) & (pts <= 1), axis=2)
        frac[lo:lo + step] = inside.mean(axis=1)
        contrib = offs * inside[:, :, None]
        mom[lo:lo + step] = contrib.mean(axis=1)
        mom_sd[lo:lo + step] = contrib.std(axis=1, ddof=1)
    vol_H = e2 * radii ** d
    frac_se = np.sqrt(frac * (1 - frac) / mc_points)
    return BallMoments(
        vol_G=vol_H * frac,
        vol_G_se=vol_H * frac_se,
        frac=frac,
        frac_se=frac_se,
        moment=vol_H[:, None] * mom,
        moment_se=vol_H[:, None] * mom_sd / math.sqrt(mc_points),
    )


def _interval(pair: BallCubePair) -> tuple[float, float]:
    c, r = float(pair.center[0]), pair.radius
    return max(0.0, c - r), min(1.0, c + r)


def vol_G(pair: BallCubePair, mc_points: int, seed: int) -> Estimate:
    """Volume of the clipped ball: exact for d = 1, Monte Carlo otherwise."""
    if mc_points < 1000:
        raise DomainError("mc_points must be >= 1000")
    r = pair.radius
    if r == 0:
        return Estimate(0.0, 0.0)
    if pair.d == 1:
        a, b = _interval(pair)
        return Estimate(b - a, 0.0)
    res = ball_moments(pair.center[None, :], np.array([r]), mc_points, stream(seed))
    return Estimate(float(res.vol_G[0]), float(res.vol_G_se[0]))


def lemma_ratio(pair: BallCubePair, mc_points: int, seed: int) -> Estimate:
    """``vol G / vol H``: the fraction of the ball that stays in the cube."""
    r = pair.radius
    if r <= 0:
        raise DomainError("the ball needs a positive radius")
    if pair.d == 1:
        a, b = _interval(pair)
        return Estimate((b - a) / (2 * r), 0.0)
    res = ball_moments(pair.center[None, :], np.array([r]), mc_points, stream(seed))
    return Estimate(float(res.frac[0]), float(res.frac_se[0]))


def boundary_moment(pair: BallCubePair, axis: int, mc_points: int, seed: int) -> Estimate:
    """``int_G (w_axis - u_axis) dw`` (0-based axis); exact for d = 1."""
    r = pair.radius
    if r <= 0:
        raise DomainError("the ball needs a positive radius")
    if not 0 <= axis < pair.d:
        raise DomainError(f"axis {axis} outside 0..{pair.d - 1}")
    if pair.d == 1:
        a, b = _interval(pair)
        c = float(pair.center[0])
        return Estimate(((b - c) ** 2 - (a - c) ** 2) / 2, 0.0)
    res = ball_moments(pair.center[None, :], np.array([r]), mc_points, stream(seed))
    return Estimate(float(res.moment[0, axis]), float(res.moment_se[0, axis]))


# --------------------------------------------------------------------------
# Monte Carlo F(u)


@dataclass(frozen=True)
class FEstimate:
    u: NDArray[np.float64]
    value: NDArray[np.float64]
    stderr: NDArray[np.float64]


def _clipped_volumes(
    centers: NDArray[np.float64], radii: NDArray[np.float64], mc_points: int, rng: np.random.Generator
) -> NDArray[np.float64]:
    # Sample the ball's bounding box clipped to the cube: the box contains G,
    # so the estimate stays sharp for balls much larger than the cube.
    P, d = centers.shape
    lo_all = np.clip(centers - radii[:, None], 0, 1)
    hi_all = np.clip(centers + radii[:, None], 0, 1)
    box_vol = np.prod(hi_all - lo_all, axis=1)
    out = np.empty(P)
    step = max(1, _CHUNK_ENTRIES // (mc_points * d))
    for s in range(0, P, step):
        lo, hi = lo_all[s:s + step], hi_all[s:s + step]
        pts = lo[:, None, :] + (hi - lo)[:, None, :] * rng.random((lo.shape[0], mc_points, d))
        sq = np.sum((pts - centers[s:s + step, None, :]) ** 2, axis=2)
        out[s:s + step] = (sq <= radii[s:s + step, None] ** 2).mean(axis=1)
    return box_vol * out


def F_mc(u: ArrayLike, d: int, mc_pairs: int, seed: int, inner_points: int = 2000) -> FEstimate:
    """Monte Carlo ``F`` at one or more ``u`` from one shared set of pairs.

    Pairs ``(x, x')`` are uniform on the cube squared; a pair counts when its
    ball leaves the cube (radius above the distance from ``x`` to the nearest
    face) and its clipped volume is at most ``u``. The clipped volume is exact
    for d = 1 and estimated with ``inner_points`` samples otherwise.
    """
    if mc_pairs < 10_000:
        raise DomainError("mc_pairs must be >= 10^4")
    us = np.atleast_1d(np.asarray(u, dtype=np.float64))
    _check_u(us)
    rng = stream(seed)
    x = rng.random((mc_pairs, d))
    w = rng.random((mc_pairs, d))
    r = np.sqrt(np.sum((x - w) ** 2, axis=1))
    face = np.minimum(x, 1 - x).min(axis=1)
    exits = r > face
    vol = np.full(mc_pairs, np.inf)
    if d == 1:
        vol[exits] = np.minimum(1.0, x[exits, 0] + r[exits]) - np.maximum(0.0, x[exits, 0] - r[exits])
    else:
        vol[exits] = _clipped_volumes(x[exits], r[exits], inner_points, rng)
    hits = exits[None, :] & (vol[None, :] <= us[:, None])
    # every clipped volume is <= 1, so u = 1 counts all exiting pairs
    hits[us >= 1] = exits
    mean = hits.mean(axis=1)
    se = np.sqrt(mean * (1 - mean) / mc_pairs)
    return FEstimate(us, mean, se)
