"""Monte Carlo risk of the k-NN estimator and empirical convergence rates."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from knnlab.config import ExperimentConfig
from knnlab.knn_core import KnnRegressor
from knnlab.sampler import DistributionSpec, NoiseKind, sample, stream
from knnlab.smooth_model import SmoothFunction

_EVAL_STREAM = 1
_BOOTSTRAP_STREAM = 0xB007


@dataclass(frozen=True)
class RiskEstimate:
    n: int
    k: int
    risk: float
    stderr: float
    per_rep: NDArray[np.float64]


@dataclass(frozen=True)
class RateFit:
    log_n: NDArray[np.float64]
    log_risk: NDArray[np.float64]
    slope: float
    intercept: float
    slope_stderr: float
    target: float

    def within(self, band: float) -> bool:
        return abs(self.slope - self.target) <= band


def fit_slope(ns: ArrayLike, risks: ArrayLike) -> tuple[float, float]:
    """Least-squares line through ``(log n, log risk)``; returns (slope, intercept)."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.asarray(risks, dtype=np.float64))
    if x.size < 3:
        raise ValueError("need at least 3 points to fit a rate")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(slope), float(intercept)


def _replication_loss(cfg: ExperimentConfig, spec: DistributionSpec, n: int, k: int, rep: int) -> float:
    data = sample(spec, n, cfg.master_seed, n, rep)
    model = KnnRegressor(data)
    xq = stream(cfg.master_seed, n, rep, _EVAL_STREAM).random((cfg.eval_points, cfg.d))
    err = model.predict(xq, k) - spec.m.value(xq)
    return float(np.mean(err * err))


def estimate_risk(cfg: ExperimentConfig, n: int, k: int | None = None) -> RiskEstimate:
    """Expected squared L2 error at sample size n, averaged over ``cfg.reps`` replications.

    Each replication draws its dataset and its ``cfg.eval_points`` fresh
    uniform query points from streams addressed by ``(seed, n, rep)``, so
    results do not depend on ``cfg.workers``.
    """
    k = cfg.k_for(n) if k is None else k
    if not 1 <= k <= n:
        raise ValueError(f"k = {k} is infeasible for n = {n}")
    spec = DistributionSpec(cfg.function(), cfg.sigma, cfg.noise_kind)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            losses = list(pool.map(lambda r: _replication_loss(cfg, spec, n, k, r), range(cfg.reps)))
    else:
        losses = [_replication_loss(cfg, spec, n, k, r) for r in range(cfg.reps)]
    per_rep = np.asarray(losses)
    return RiskEstimate(
        n=n,
        k=k,
        risk=math.fsum(losses) / cfg.reps,
        stderr=float(per_rep.std(ddof=1) / math.sqrt(cfg.reps)),
        per_rep=per_rep,
    )


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    estimates: list[RiskEstimate]
    fit: RateFit

    @property
    def passed(self) -> bool:
        return self.fit.within(self.config.slope_band)


def bootstrap_slope_stderr(estimates: list[RiskEstimate], resamples: int, seed: int) -> float:
    """Spread of the fitted slope when replications are resampled within each n."""
    rng = stream(seed, _BOOTSTRAP_STREAM)
    ns = [e.n for e in estimates]
    slopes = np.empty(resamples)
    for b in range(resamples):
        risks = [e.per_rep[rng.integers(0, e.per_rep.size, e.per_rep.size)].mean() for e in estimates]
        slopes[b] = fit_slope(ns, risks)[0]
    return float(slopes.std(ddof=1))


def sweep(cfg: ExperimentConfig) -> SweepResult:
    """Risk at every n of the grid plus the fitted log-log rate."""
    estimates = [estimate_risk(cfg, n) for n in cfg.n_grid]
    ns = np.array([e.n for e in estimates])
    risks = np.array([e.risk for e in estimates])
    slope, intercept = fit_slope(ns, risks)
    fit = RateFit(
        log_n=np.log(ns),
        log_risk=np.log(risks),
        slope=slope,
        intercept=intercept,
        slope_stderr=bootstrap_slope_stderr(estimates, cfg.bootstrap, cfg.master_seed),
        target=cfg.target_rate,
    )
    return SweepResult(cfg, estimates, fit)


@dataclass(frozen=True)
class BoundTrace:
    n: int
    k: int
    risk: float
    stderr: float
    term_variance: float
    term_bias_p: float
    term_mid: float
    term_cross: float

    @property
    def dominant(self) -> str:
        terms = {
            "variance": self.term_variance,
            "bias_p": self.term_bias_p,
            "mid": self.term_mid,
            "cross": self.term_cross,
        }
        return max(terms, key=terms.get)

    @property
    def max_term(self) -> float:
        return max(self.term_variance, self.term_bias_p, self.term_mid, self.term_cross)


def bound_terms(sigma: float, p: float, d: int, n: int, k: int) -> tuple[float, float, float, float]:
    """Unit-constant shapes of the four terms bounding the risk."""
    ratio = k / n
    return sigma ** 2 / k, ratio ** (2 * p / d), ratio ** (2 / d) / k, ratio ** (3 / d)


def final_bound_trace(cfg: ExperimentConfig, n: int, estimate: RiskEstimate | None = None) -> BoundTrace:
    est = estimate if estimate is not None else estimate_risk(cfg, n)
    tv, tb, tm, tc = bound_terms(cfg.sigma, cfg.p, cfg.d, est.n, est.k)
    return BoundTrace(est.n, est.k, est.risk, est.stderr, tv, tb, tm, tc)


@dataclass(frozen=True)
class BiasVariance:
    """Fixed-design decomposition of the squared error at one query point."""

    k: int
    total: float
    total_se: float
    variance_term: float
    variance_se: float
    bias_sq: float
    gap: float  # total - variance_term - bias_sq
    gap_se: float
    sigma_sq_over_k: float

    @property
    def identity_holds(self) -> bool:
        return abs(self.gap) <= 3 * self.gap_se or self.gap == 0.0

    @property
    def variance_bounded(self) -> bool:
        return self.variance_term <= self.sigma_sq_over_k + 3 * self.variance_se


def bias_variance_probe(
    fixed_xs: ArrayLike,
    m: SmoothFunction,
    sigma: float,
    x: ArrayLike,
    k: int,
    reps: int,
    seed: int,
    noise_kind: NoiseKind | str = NoiseKind.GAUSSIAN,
) -> BiasVariance:
    """Redraw only the responses ``reps`` times with the design held fixed."""
    xs = np.ascontiguousarray(fixed_xs, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs.reshape(-1, 1)
    q = np.asarray(x, dtype=np.float64).reshape(1, -1)
    spec = DistributionSpec(m, sigma, noise_kind)
    idx = KnnRegressor(index="brute").fit(xs, np.zeros(xs.shape[0])).kneighbors(q, k)[0]
    m_x = float(m.value(q)[0])
    m_nb = m.value(xs)
    bias = float(np.sum(m_nb[idx]) / k - m_x)

    rng = stream(seed)
    err = np.empty(reps)
    noise_mean = np.empty(reps)
    for r in range(reps):
        ys = m_nb + spec.noise(xs, rng)
        err[r] = np.sum(ys[idx]) / k - m_x
        noise_mean[r] = np.sum(ys[idx] - m_nb[idx]) / k
    total = err * err
    var = noise_mean * noise_mean
    gap = total - var - bias * bias
    root = math.sqrt(reps)
    return BiasVariance(
        k=k,
        total=float(total.mean()),
        total_se=float(total.std(ddof=1) / root),
        variance_term=float(var.mean()),
        variance_se=float(var.std(ddof=1) / root),
        bias_sq=bias * bias,
        gap=float(gap.mean()),
        gap_se=float(gap.std(ddof=1) / root),
        sigma_sq_over_k=sigma ** 2 / k,
    )
