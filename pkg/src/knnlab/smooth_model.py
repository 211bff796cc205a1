"""Smoothness classes and a catalog of (p, C)-smooth regression functions.

Every catalog entry carries an analytic gradient and a Hölder certificate
``(p, C)`` derived by hand; :func:`certify_holder` checks the certificate
on random point pairs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

BOUNDARY_TOL = 1e-12
HOLDER_SLACK = 1e-9


class DomainError(ValueError):
    """Point or argument outside the domain of an operation."""


class UnsupportedError(RuntimeError):
    """Operation not defined for this smoothness order."""


@dataclass(frozen=True)
class SmoothnessClass:
    """The pair (p, C) with p split as q + r, q integer and 0 < r <= 1."""

    p: float
    C: float
    q: int = field(init=False)
    r: float = field(init=False)

    def __post_init__(self):
        if not (self.p > 0 and self.C > 0):
            raise DomainError(f"need p > 0 and C > 0, got p={self.p}, C={self.C}")
        q = math.ceil(self.p) - 1
        object.__setattr__(self, "q", int(q))
        object.__setattr__(self, "r", float(self.p - q))


Field = Callable[[NDArray[np.float64]], NDArray[np.float64]]


@dataclass(frozen=True)
class SmoothFunction:
    """A regression function on [0, 1]^d with its gradient and certificate.

    ``value`` maps an (N, d) array to N values; ``gradient`` maps it to an
    (N, d) array of first partials. ``grad_bound`` dominates every
    ``|m_s(x)|`` on the cube.
    """

    name: str
    dim: int
    value: Field
    gradient: Field
    smoothness: SmoothnessClass
    grad_bound: float

    def holder_field(self, pts: NDArray[np.float64]) -> NDArray[np.float64]:
        """Order-q partials at ``pts`` as an (N, m) array (q is 0 or 1)."""
        q = self.smoothness.q
        if q == 0:
            return self.value(pts)[:, None]
        if q == 1:
            return self.gradient(pts)
        raise UnsupportedError(f"order-{q} partials are not stored")


def _as_points(x: ArrayLike, dim: int) -> tuple[NDArray[np.float64], bool]:
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 0 or (pts.ndim == 1 and pts.shape[0] == dim)
    if single:
        pts = pts.reshape(1, dim)
    elif pts.ndim == 1 and dim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise DomainError(f"expected points of dimension {dim}, got {pts.shape[1]}")
    if np.any(pts < -BOUNDARY_TOL) or np.any(pts > 1 + BOUNDARY_TOL):
        raise DomainError("point outside [0, 1]^d")
    return pts, single


def evaluate(f: SmoothFunction, x: ArrayLike) -> float | NDArray[np.float64]:
    """m(x) for one point (returns float) or an (N, d) batch (returns array)."""
    pts, single = _as_points(x, f.dim)
    vals = f.value(pts)
    return float(vals[0]) if single else vals


def partial(f: SmoothFunction, s: int, x: ArrayLike) -> float | NDArray[np.float64]:
    """First partial derivative along axis ``s`` (0-based), from the analytic gradient."""
    if f.smoothness.q < 1:
        raise UnsupportedError(f"{f.name} has q = 0; partials are not part of its certificate")
    if not 0 <= s < f.dim:
        raise DomainError(f"axis {s} outside 0..{f.dim - 1}")
    pts, single = _as_points(x, f.dim)
    g = f.gradient(pts)[:, s]
    return float(g[0]) if single else g


@dataclass(frozen=True)
class HolderCertificate:
    max_ratio: float
    pass_: bool
    C: float
    samples: int


def certify_holder(f: SmoothFunction, samples: int, seed: int) -> HolderCertificate:
    """Sampled check of ``|d^q m(x) - d^q m(z)| <= C ||x - z||^r``.

    Half the pairs are independent uniform points, the other half are
    local perturbations at log-uniform scales (these find the tight pairs
    near kinks). Passes iff the largest ratio is within ``C (1 + 1e-9)``.
    """
    if samples < 2:
        raise DomainError("samples must be >= 2")
    rng = np.random.default_rng(seed)
    cls = f.smoothness
    d = f.dim
    n_far = samples // 2
    n_near = samples - n_far
    x = rng.random((samples, d))
    z = np.empty_like(x)
    z[:n_far] = rng.random((n_far, d))
    scale = 10.0 ** rng.uniform(-8, -0.5, size=(n_near, 1))
    z[n_far:] = np.clip(x[n_far:] + scale * rng.standard_normal((n_near, d)), 0.0, 1.0)

    max_ratio = 0.0
    chunk = 200_000
    for lo in range(0, samples, chunk):
        xs, zs = x[lo:lo + chunk], z[lo:lo + chunk]
        dist = np.sqrt(np.sum((xs - zs) ** 2, axis=1))
        ok = dist > 0
        diff = np.abs(f.holder_field(xs[ok]) - f.holder_field(zs[ok])).max(axis=1)
        if diff.size:
            max_ratio = max(max_ratio, float(np.max(diff / dist[ok] ** cls.r)))
    return HolderCertificate(
        max_ratio=max_ratio,
        pass_=max_ratio <= cls.C * (1 + HOLDER_SLACK),
        C=cls.C,
        samples=samples,
    )


# --------------------------------------------------------------------------
# catalog


def constant(dim: int = 1, level: float = 0.0, p: float = 1.5, C: float = 1.0) -> SmoothFunction:
    def value(x):
        return np.full(x.shape[0], float(level))

    def gradient(x):
        return np.zeros_like(x)

    return SmoothFunction(
        name=f"constant_d{dim}",
        dim=dim,
        value=value,
        gradient=gradient,
        smoothness=SmoothnessClass(p, C),
        grad_bound=0.0,
    )


def kink(p: float, dim: int, amplitude: float = 1.0, center: float = 0.5) -> SmoothFunction:
    """``sum_s a |x_s - c|^p``: smooth of order exactly p at the kink ``x_s = c``.

    For 1 < p <= 2 the partial ``a p sign(t)|t|^(p-1)`` is Hölder with
    exponent ``r = p - 1`` and constant ``a p 2^(1-r)`` (tight for ``t = -t'``).
    For 0 < p <= 1 the function itself is Hölder with constant
    ``a d^(1 - p/2)``.
    """
    if not 0 < p <= 2:
        raise DomainError("kink functions are catalogued for 0 < p <= 2")
    a = float(amplitude)
    if p > 1:
        r = p - 1
        C = a * p * 2.0 ** (1 - r)
    else:
        C = a * dim ** (1 - p / 2)
    # p = 1 has q = 0 and a bounded (discontinuous) gradient; p < 1 is unbounded
    grad_bound = a * p * max(center, 1 - center) ** (p - 1) if p >= 1 else math.inf

    def value(x):
        return a * np.sum(np.abs(x - center) ** p, axis=1)

    def gradient(x):
        t = x - center
        return a * p * np.sign(t) * np.abs(t) ** (p - 1)

    return SmoothFunction(
        name=f"kink_p{p:g}_d{dim}",
        dim=dim,
        value=value,
        gradient=gradient,
        smoothness=SmoothnessClass(p, C),
        grad_bound=grad_bound,
    )


def _c2_certificate(p: float, dim: int, hess_row_norm: float, lipschitz: float) -> SmoothnessClass:
    # Lipschitz-L maps on the cube (diameter sqrt(d)) are r-Hölder with L d^((1-r)/2).
    if p > 2:
        raise DomainError("C^2 catalog functions certify p <= 2 only")
    if p > 1:
        r = p - 1
        return SmoothnessClass(p, hess_row_norm * dim ** ((1 - r) / 2))
    return SmoothnessClass(p, lipschitz * dim ** ((1 - p) / 2))


def sine(dim: int, omega: ArrayLike | None = None, p: float = 1.5) -> SmoothFunction:
    """``sin(<omega, x>)`` with a certificate from its second-derivative bound."""
    w = np.full(dim, 2.0) if omega is None else np.asarray(omega, dtype=np.float64)
    if w.shape != (dim,):
        raise DomainError("omega must have one entry per axis")
    wnorm = float(np.linalg.norm(w))
    cls = _c2_certificate(p, dim, float(np.max(np.abs(w))) * wnorm, wnorm)

    def value(x):
        return np.sin(x @ w)

    def gradient(x):
        return np.cos(x @ w)[:, None] * w

    return SmoothFunction(
        name=f"sine_d{dim}",
        dim=dim,
        value=value,
        gradient=gradient,
        smoothness=cls,
        grad_bound=float(np.max(np.abs(w))),
    )


def product(dim: int = 2, p: float = 1.5) -> SmoothFunction:
    """``x_1 x_2 ... x_d``; each partial is 1-Lipschitz per other axis."""
    hess = math.sqrt(dim - 1) if dim > 1 else 0.0
    cls = _c2_certificate(p, dim, hess if hess > 0 else 1.0, math.sqrt(dim))

    def value(x):
        return np.prod(x, axis=1)

    def gradient(x):
        g = np.empty_like(x)
        for s in range(dim):
            g[:, s] = np.prod(np.delete(x, s, axis=1), axis=1)
        return g

    return SmoothFunction(
        name=f"product_d{dim}",
        dim=dim,
        value=value,
        gradient=gradient,
        smoothness=cls,
        grad_bound=1.0,
    )


_NAME = re.compile(r"^(?P<kind>constant|kink|sine|product)(?:_p(?P<p>[0-9.]+))?_d(?P<d>[0-9]+)$")


def catalog(name: str) -> SmoothFunction:
    """Look up a function by name, e.g. ``kink_p1.5_d1``, ``sine_p1.25_d2``, ``constant_d3``."""
    m = _NAME.match(name)
    if m is None:
        raise KeyError(f"unknown catalog function {name!r}")
    kind, d = m["kind"], int(m["d"])
    if d < 1:
        raise KeyError(f"bad dimension in {name!r}")
    p = float(m["p"]) if m["p"] else None
    if kind == "kink":
        if p is None:
            raise KeyError("kink functions need an order, e.g. kink_p1.5_d1")
        f = kink(p, d)
    elif kind == "sine":
        f = sine(d, p=p or 1.5)
    elif kind == "product":
        f = product(d, p=p or 1.5)
    else:
        f = constant(d, p=p or 1.5)
    return _renamed(f, name)


def _renamed(f: SmoothFunction, name: str) -> SmoothFunction:
    return SmoothFunction(name, f.dim, f.value, f.gradient, f.smoothness, f.grad_bound)


CATALOG_NAMES = (
    "constant_d1",
    "constant_d2",
    "kink_p1.5_d1",
    "kink_p1.5_d2",
    "kink_p1.25_d1",
    "kink_p1.25_d3",
    "kink_p0.8_d2",
    "sine_p1.5_d1",
    "sine_p1.5_d2",
    "sine_p1.2_d3",
    "product_p1.5_d2",
)
