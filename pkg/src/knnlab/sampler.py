"""Seeded i.i.d. datasets from the class of uniform-design, bounded-variance models."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from knnlab.smooth_model import SmoothFunction


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM_CENTERED = "uniform_centered"
    HETEROSCEDASTIC_CAPPED = "heteroscedastic_capped"


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Philox generator for the stream addressed by ``(master_seed, *path)``.

    Distinct paths give non-overlapping streams, so replication ``i`` can
    be drawn on any worker in any order.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(i) for i in path))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class DistributionSpec:
    """X uniform on [0, 1]^d, Y = m(X) + noise with Var(Y | X = x) <= noise_sd^2."""

    m: SmoothFunction
    noise_sd: float = 0.0
    noise_kind: NoiseKind = NoiseKind.GAUSSIAN

    def __post_init__(self):
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        object.__setattr__(self, "noise_kind", NoiseKind(self.noise_kind))

    @property
    def d(self) -> int:
        return self.m.dim

    @property
    def spec_id(self) -> str:
        return f"{self.m.name}|{self.noise_kind.value}|{self.noise_sd!r}"

    def conditional_sd(self, xs: NDArray[np.float64]) -> NDArray[np.float64]:
        """Standard deviation of the noise at each design point."""
        if self.noise_kind is NoiseKind.HETEROSCEDASTIC_CAPPED:
            return np.minimum(self.noise_sd * xs[:, 0], self.noise_sd)
        return np.full(xs.shape[0], self.noise_sd)

    def noise(self, xs: NDArray[np.float64], rng: np.random.Generator) -> NDArray[np.float64]:
        n = xs.shape[0]
        if self.noise_sd == 0:
            return np.zeros(n)
        if self.noise_kind is NoiseKind.UNIFORM_CENTERED:
            half = np.sqrt(3.0) * self.noise_sd
            return rng.uniform(-half, half, size=n)
        return self.conditional_sd(xs) * rng.standard_normal(n)


@dataclass(frozen=True)
class Dataset:
    xs: NDArray[np.float64]
    ys: NDArray[np.float64]
    seed: int
    spec_id: str

    def __post_init__(self):
        if self.xs.ndim != 2 or self.xs.shape[0] != self.ys.shape[0] or self.xs.shape[0] < 1:
            raise ValueError("need n >= 1 points with one response each")

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def d(self) -> int:
        return self.xs.shape[1]

    def to_csv(self, path: str | Path) -> None:
        """Write columns ``x_1..x_d, y`` with round-trip float formatting."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x_{s + 1}" for s in range(self.d)] + ["y"])
            for row, y in zip(self.xs, self.ys):
                w.writerow([repr(float(v)) for v in row] + [repr(float(y))])

    @classmethod
    def from_csv(cls, path: str | Path, seed: int = -1, spec_id: str = "csv") -> "Dataset":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(np.ascontiguousarray(data[:, :-1]), np.ascontiguousarray(data[:, -1]), seed, spec_id)


def sample(spec: DistributionSpec, n: int, seed: int, *path: int) -> Dataset:
    """Draw ``n`` i.i.d. pairs; bit-reproducible for fixed ``(spec, n, seed, path)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream(seed, *path)
    xs = rng.random((n, spec.d))
    ys = spec.m.value(xs) + spec.noise(xs, rng)
    return Dataset(xs, ys, seed, spec.spec_id)
