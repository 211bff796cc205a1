"""Acceptance checks, runnable from ``knnlab verify`` and from pytest.

Each ``criterion_*`` function runs one check at its fixed tolerance and
returns a :class:`Criterion`. Nothing here is tuned after the fact: the
seeds, sample sizes and bands are the ones listed below.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from knnlab import asymptotics as asy
from knnlab import geometry_oracle as geo
from knnlab.config import ExperimentConfig, load_config, make_config
from knnlab.knn_core import build_kdtree, brute_neighbors, tree_neighbors
from knnlab.rate_bench import bias_variance_probe, fit_slope, sweep
from knnlab.report import geometry_table, write_geometry, write_sweep
from knnlab.sampler import stream
from knnlab.smooth_model import catalog


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d}. {self.name}: {self.detail} ({self.seconds:.1f}s)"


def packaged_config(name: str) -> ExperimentConfig:
    """Load one of the bundled configs, e.g. ``theorem_d1`` or ``theorem_d1.cfg``."""
    if not name.endswith(".cfg"):
        name += ".cfg"
    ref = resources.files("knnlab") / "configs" / name
    with resources.as_file(ref) as path:
        return load_config(path)


def _timed(number: int, name: str, limit: float | None, body: Callable[[], tuple[bool, str]]) -> Criterion:
    t0 = time.perf_counter()
    ok, detail = body()
    elapsed = time.perf_counter() - t0
    if limit is not None and elapsed > limit:
        ok = False
        detail += f"; runtime {elapsed:.0f}s over the {limit:.0f}s limit"
    return Criterion(number, name, ok, detail, elapsed)


def _rate(number: int, cfg_name: str, limit: float, max_slope_se: float | None) -> Criterion:
    def body():
        cfg = packaged_config(cfg_name)
        res = sweep(cfg)
        fit = res.fit
        ok = fit.within(cfg.slope_band)
        detail = (f"d={cfg.d} slope {fit.slope:.4f} (target {fit.target:.4f}, band ±{cfg.slope_band}), "
                  f"slope_stderr {fit.slope_stderr:.4f}")
        if max_slope_se is not None:
            ok = ok and fit.slope_stderr <= max_slope_se
            detail += f" <= {max_slope_se}"
        return ok, detail

    return _timed(number, f"rate experiment ({cfg_name})", limit, body)


def criterion_1() -> Criterion:
    return _rate(1, "theorem_d1.cfg", 600, 0.05)


def criterion_2() -> Criterion:
    return _rate(2, "theorem_d2.cfg", 900, None)


def criterion_3() -> Criterion:
    def body():
        notes = []
        ok = True
        for d in (1, 2, 3):
            tab = geometry_table(d, 100_000, seed=3000 + d)
            good = int(tab.passes.sum())
            ok &= bool(tab.passes.all())
            bp = geo.constants(d).breakpoint
            jump = abs(float(geo.F_small_branch(bp, d) - geo.F_large_branch(bp, d)))
            ok &= jump <= 1e-12
            notes.append(f"d={d}: {good}/20 within 3se, branch gap {jump:.1e}")
        u = np.linspace(0, 1, 1001)
        d1 = float(np.max(np.abs(geo.F_closed(u, 1) - u ** 2 / 2)))
        ok &= d1 <= 1e-12
        notes.append(f"d=1 vs u^2/2 max err {d1:.1e}")
        return ok, "; ".join(notes)

    return _timed(3, "geometry: F closed form vs Monte Carlo", 120, body)


LEMMA_PAIRS = 10_000
LEMMA_MC = 1_000
LEMMA_DIMS = (1, 2, 3, 5)


def _sweep_pairs(d: int, seed: int):
    rng = stream(seed, d)
    u = rng.random((LEMMA_PAIRS, d))
    v = rng.random((LEMMA_PAIRS, d))
    r = np.sqrt(np.sum((u - v) ** 2, axis=1))
    if d == 1:
        lo = np.maximum(0.0, u[:, 0] - r)
        hi = np.minimum(1.0, u[:, 0] + r)
        vol_G = hi - lo
        frac = vol_G / (2 * r)
        zeros = np.zeros(LEMMA_PAIRS)
        moment = (((hi - u[:, 0]) ** 2 - (lo - u[:, 0]) ** 2) / 2)[:, None]
        return geo.BallMoments(vol_G, zeros, frac, zeros, moment, zeros[:, None])
    return geo.ball_moments(u, r, LEMMA_MC, rng)


def criterion_4() -> Criterion:
    def body():
        ok = True
        notes = []
        for d in LEMMA_DIMS:
            e3 = geo.constants(d).e3
            res = _sweep_pairs(d, 4000)
            slack = res.frac - (e3 - 3 * res.frac_se)
            ok &= bool(np.all(slack >= 0))
            notes.append(f"d={d}: min ratio {res.frac.min():.4f} vs e3 {e3:.3g}")
        return ok, "; ".join(notes)

    return _timed(4, f"lemma sweep ({LEMMA_PAIRS} pairs per d)", 120, body)


def criterion_5() -> Criterion:
    def body():
        ok = True
        notes = []
        for d in LEMMA_DIMS:
            c2 = geo.constants(d).c2
            res = _sweep_pairs(d, 4000)
            bound = c2 * res.vol_G[:, None] ** ((d + 1) / d) + 3 * res.moment_se
            use = np.abs(res.moment) / np.maximum(bound, 1e-300)
            ok &= bool(np.all(np.abs(res.moment) <= bound))
            notes.append(f"d={d}: max |moment|/bound {use.max():.3g}")
        return ok, "; ".join(notes)

    return _timed(5, "boundary-moment sweep", 120, body)


def criterion_6() -> Criterion:
    def body():
        ok = asy.beta_fn(2, 3) == 1 / 12
        notes = [f"B(2,3) = {asy.beta_fn(2, 3)!r}"]
        exact = all(asy.stirling_ratio(n, 3) == 1 / (n + 1) for n in (1, 10, 100, 1000, 10_000, 10 ** 6))
        ok &= exact
        notes.append(f"d=3 ratio == 1/(n+1): {exact}")
        for d in (1, 2, 3):
            rel = 1e4 ** (3 / d) * asy.stirling_ratio(10 ** 4, d) / asy.stirling_limit(d) - 1
            ok &= abs(rel) <= 0.01
            notes.append(f"d={d} rel err {rel:.2e}")
        return ok, "; ".join(notes)

    return _timed(6, "Beta and Stirling identities", 60, body)


MOMENT_CASES = ((1, 1.0), (2, 1.0), (2, 1.5))
MOMENT_SCALES = ((500, 10), (2000, 40), (8000, 160))
MOMENT_REPS = 400


def moment_ratios(d: int, gamma: float, seed: int = 7000) -> list[float]:
    return [asy.nn_moment(gamma, n, k, d, MOMENT_REPS, seed + i).ratio for i, (n, k) in enumerate(MOMENT_SCALES)]


def criterion_7() -> Criterion:
    def body():
        ok = True
        notes = []
        for d, g in MOMENT_CASES:
            r = moment_ratios(d, g)
            spread = max(r) / min(r)
            ok &= spread < 2
            notes.append(f"(d={d}, gamma={g:g}) spread {spread:.3f}")
        return ok, "; ".join(notes)

    return _timed(7, "nearest-neighbor moment scaling", 180, body)


CROSS_CASES = ((3, 2, 1), (10, 3, 2), (20, 5, 2))
CROSS_REPS = 2_000_000


def criterion_8() -> Criterion:
    def body():
        ok = True
        notes = []
        for n, k, d in CROSS_CASES:
            for s in range(d):
                ct = asy.cross_term(n, k, d, s, CROSS_REPS, seed=8000 + 10 * n + s)
                ok &= ct.z <= 3
                notes.append(f"({n},{k},{d}) axis {s}: z={ct.z:.2f}")
        return ok, "; ".join(notes)

    return _timed(8, "cross-term identity (direct vs region integral)", 120, body)


BV_DESIGNS = 20
BV_REPS = 4000


def criterion_9() -> Criterion:
    def body():
        ok = True
        worst_gap = worst_var = 0.0
        for i in range(BV_DESIGNS):
            rng = stream(9000, i)
            d = int(rng.integers(1, 4))
            n = int(rng.integers(20, 300))
            k = int(rng.integers(1, min(n, 60) + 1))
            m = catalog(f"kink_p1.5_d{d}")
            xs = rng.random((n, d))
            x = rng.random(d)
            sigma = float(rng.uniform(0.1, 1.0))
            bv = bias_variance_probe(xs, m, sigma, x, k, BV_REPS, seed=9100 + i)
            z_gap = abs(bv.gap) / bv.gap_se if bv.gap_se > 0 else 0.0
            z_var = abs(bv.variance_term - bv.sigma_sq_over_k) / bv.variance_se
            worst_gap, worst_var = max(worst_gap, z_gap), max(worst_var, z_var)
            ok &= z_gap <= 3 and z_var <= 3
        return ok, f"{BV_DESIGNS} designs; worst identity z {worst_gap:.2f}, worst variance z {worst_var:.2f}"

    return _timed(9, "bias-variance decomposition", 60, body)


def tree_vs_brute_cases(seed: int = 10_000, datasets: int = 200, queries: int = 13) -> tuple[int, int]:
    """Compare predictions of both engines; returns (cases, mismatches).

    A third of the datasets are snapped to a 1/8 grid so exact distance
    ties are common.
    """
    cases = mismatches = 0
    for d in (1, 2, 3, 5):
        for i in range(datasets):
            rng = stream(seed, d, i)
            n = int(rng.integers(1, 1500))
            xs = rng.random((n, d))
            q = rng.random((queries, d))
            if i % 3 == 0:
                xs = np.round(xs * 8) / 8
                q = np.round(q * 8) / 8
            ys = rng.standard_normal(n)
            k = int(rng.integers(1, n + 1))
            tree = build_kdtree(xs)
            a = tree_neighbors(tree, q, k)
            b = brute_neighbors(xs, q, k)
            pa = ys[a].sum(axis=1) / k
            pb = ys[b].sum(axis=1) / k
            cases += queries
            mismatches += int(np.sum(np.any(a != b, axis=1) | (pa.view(np.int64) != pb.view(np.int64))))
    return cases, mismatches


def _tiny_config() -> ExperimentConfig:
    return make_config("kink_p1.5_d1", sigma=0.5, n_grid=(64, 128, 256), reps=10, eval_points=50,
                       master_seed=42, bootstrap=50)


def criterion_10() -> Criterion:
    def body():
        notes = []
        cases, bad = tree_vs_brute_cases()
        ok = bad == 0 and cases >= 10_000
        notes.append(f"tree vs brute: {bad} mismatches in {cases} cases")

        cfg = _tiny_config()
        with tempfile.TemporaryDirectory() as tmp:
            blobs = []
            for run in range(2):
                out = Path(tmp) / f"run{run}"
                write_sweep(sweep(cfg), out, plot=False)
                write_geometry(geometry_table(2, 10_000, seed=5), out, plot=False)
                blobs.append([(p.name, p.read_bytes()) for p in sorted(out.glob("*.csv"))])
        same = blobs[0] == blobs[1]
        ok &= same
        notes.append(f"repeated seeded CSV byte-identical: {same}")

        worst = 0.0
        ns = np.array([2 ** e for e in range(6, 16)], dtype=float)
        for beta in (0.25, 0.5, 0.6, 0.75, 1.0, 4 / 3):
            slope, _ = fit_slope(ns, 3.7 * ns ** -beta)
            worst = max(worst, abs(slope + beta))
        ok &= worst <= 1e-10
        notes.append(f"slope fitter max error {worst:.1e}")
        return ok, "; ".join(notes)

    return _timed(10, "engineering invariants", None, body)


CRITERIA: dict[int, Callable[[], Criterion]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


def run(selected=None, echo: Callable[[str], None] | None = print) -> list[Criterion]:
    results = []
    for number in selected or sorted(CRITERIA):
        res = CRITERIA[number]()
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
