"""Experiment configuration and its ``key = value`` file format.

Keys are dotted; ``#`` and ``;`` start comments::

    model.function = kink_p1.5_d1
    model.sigma = 0.5
    model.noise = gaussian
    sweep.n_grid = 256,512,1024,2048,4096,8192,16384
    sweep.reps = 50
    sweep.eval_points = 500
    sweep.k_rule = theorem          # or fixed:10, exponent:0.8
    sweep.seed = 20240101
    sweep.bootstrap = 200
    sweep.slope_band = 0.15

``model.d``, ``model.p`` and ``model.C`` default to the catalog function's
dimension and certificate.
"""

from __future__ import annotations

import configparser
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

from knnlab.knn_core import k_exponent, k_schedule
from knnlab.sampler import NoiseKind
from knnlab.smooth_model import SmoothFunction, catalog


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class KRule:
    """How k is chosen from n: the theorem schedule, a fixed k, or ``floor(n^e)``."""

    kind: str = "theorem"
    value: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "KRule":
        text = text.strip()
        if text in ("theorem", "theorem_schedule"):
            return cls()
        kind, _, arg = text.partition(":")
        try:
            if kind == "fixed":
                return cls("fixed", int(arg))
            if kind in ("exponent", "custom_exponent"):
                return cls("exponent", float(arg))
        except ValueError:
            pass
        raise ConfigError(f"bad k_rule {text!r}; use theorem, fixed:K or exponent:E")

    def k(self, n: int, p: float, d: int) -> int:
        if self.kind == "theorem":
            return k_schedule(p, d, n)
        if self.kind == "fixed":
            return min(n, max(1, int(self.value)))
        return k_exponent(n, self.value)

    def __str__(self) -> str:
        if self.kind == "theorem":
            return "theorem"
        if self.kind == "fixed":
            return f"fixed:{int(self.value)}"
        return f"exponent:{self.value!r}"


DEFAULT_GRID = tuple(2 ** e for e in range(8, 15))


@dataclass(frozen=True)
class ExperimentConfig:
    function_name: str
    d: int
    p: float
    C: float
    sigma: float
    noise_kind: NoiseKind = NoiseKind.GAUSSIAN
    n_grid: tuple[int, ...] = DEFAULT_GRID
    reps: int = 50
    eval_points: int = 500
    master_seed: int = 0
    k_rule: KRule = field(default_factory=KRule)
    bootstrap: int = 200
    slope_band: float = 0.15
    workers: int = 1

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "noise_kind", NoiseKind(self.noise_kind))
        if any(b <= a for a, b in zip(grid, grid[1:])) or not grid or grid[0] < 1:
            raise ConfigError("n_grid must be strictly increasing positive integers")
        if self.reps < 10:
            raise ConfigError("reps must be >= 10")
        if self.eval_points < 1:
            raise ConfigError("eval_points must be >= 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if self.k_rule.kind == "theorem" and not 1 < self.p <= 1.5:
            warnings.warn(f"p = {self.p} is outside (1, 1.5]; the k schedule is used anyway", stacklevel=2)

    @property
    def target_rate(self) -> float:
        return -2 * self.p / (2 * self.p + self.d)

    def function(self) -> SmoothFunction:
        try:
            return catalog(self.function_name)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None

    def k_for(self, n: int) -> int:
        return self.k_rule.k(n, self.p, self.d)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def make_config(function_name: str, **overrides) -> ExperimentConfig:
    """Build a config, filling d, p and C from the catalog entry."""
    try:
        f = catalog(function_name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    d = int(overrides.pop("d", f.dim))
    if d != f.dim:
        raise ConfigError(f"{function_name} has dimension {f.dim}, config says d = {d}")
    p = float(overrides.pop("p", f.smoothness.p))
    C = float(overrides.pop("C", f.smoothness.C))
    if p > f.smoothness.p:
        warnings.warn(f"{function_name} is only certified for p = {f.smoothness.p}", stacklevel=2)
    if f.smoothness.C > C * (1 + 1e-12):
        warnings.warn(f"{function_name} needs C = {f.smoothness.C:.6g} > configured {C:.6g}", stacklevel=2)
    return ExperimentConfig(function_name=function_name, d=d, p=p, C=C, sigma=overrides.pop("sigma", 0.0), **overrides)


_KEYS = {
    "model.function": ("function_name", str),
    "model.d": ("d", int),
    "model.p": ("p", float),
    "model.C": ("C", float),
    "model.sigma": ("sigma", float),
    "model.noise": ("noise_kind", NoiseKind),
    "sweep.n_grid": ("n_grid", lambda s: tuple(int(v) for v in s.split(",") if v.strip())),
    "sweep.reps": ("reps", int),
    "sweep.eval_points": ("eval_points", int),
    "sweep.k_rule": ("k_rule", KRule.parse),
    "sweep.seed": ("master_seed", int),
    "sweep.bootstrap": ("bootstrap", int),
    "sweep.slope_band": ("slope_band", float),
    "sweep.workers": ("workers", int),
}


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values = {}
    for key, raw in parser["config"].items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        name, conv = _KEYS[key]
        try:
            values[name] = conv(raw.strip())
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    if "function_name" not in values:
        raise ConfigError("model.function is required")
    return make_config(values.pop("function_name"), **values)


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: ExperimentConfig) -> str:
    lines = [
        f"model.function = {cfg.function_name}",
        f"model.d = {cfg.d}",
        f"model.p = {cfg.p!r}",
        f"model.C = {cfg.C!r}",
        f"model.sigma = {cfg.sigma!r}",
        f"model.noise = {cfg.noise_kind.value}",
        f"sweep.n_grid = {','.join(str(n) for n in cfg.n_grid)}",
        f"sweep.reps = {cfg.reps}",
        f"sweep.eval_points = {cfg.eval_points}",
        f"sweep.k_rule = {cfg.k_rule}",
        f"sweep.seed = {cfg.master_seed}",
        f"sweep.bootstrap = {cfg.bootstrap}",
        f"sweep.slope_band = {cfg.slope_band!r}",
        f"sweep.workers = {cfg.workers}",
    ]
    return "\n".join(lines) + "\n"
