"""Delimited outputs for the CLI subcommands.

Every writer emits CSV (or JSON) with fixed columns, a ``*_plot.csv``
file of ``x, y, yerr`` triplets, and optionally a PNG figure.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from knnlab import asymptotics as asy
from knnlab import geometry_oracle as geo
from knnlab.knn_core import k_schedule
from knnlab.rate_bench import SweepResult, final_bound_trace

SWEEP_COLUMNS = ("n", "k", "risk", "stderr", "target_rate", "slope", "slope_stderr")
TERM_COLUMNS = ("n", "k", "risk", "stderr", "term_variance", "term_bias_p", "term_mid", "term_cross", "dominant")
GEOMETRY_COLUMNS = ("d", "u", "F_closed", "F_mc", "stderr", "pass")
ASYMPTOTICS_COLUMNS = ("name", "params", "value", "bound", "pass")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_table(path: Path, columns, rows, fmt: str = "csv") -> Path:
    path = Path(path)
    if fmt == "json":
        path = path.with_suffix(".json")
        records = [{c: (_jsonable(v)) for c, v in zip(columns, row)} for row in rows]
        path.write_text(json.dumps(records, indent=2) + "\n")
        return path
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_plot_data(path: Path, x, y, yerr) -> Path:
    return write_table(path, ("x", "y", "yerr"), zip(x, y, yerr))


# --------------------------------------------------------------------------
# sweep


def sweep_rows(result: SweepResult):
    fit = result.fit
    return [(e.n, e.k, e.risk, e.stderr, fit.target, fit.slope, fit.slope_stderr) for e in result.estimates]


def write_sweep(result: SweepResult, out: Path, fmt: str = "csv", plot: bool = True) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = [write_table(out / "sweep.csv", SWEEP_COLUMNS, sweep_rows(result), fmt)]
    traces = [final_bound_trace(result.config, e.n, e) for e in result.estimates]
    term_rows = [
        (t.n, t.k, t.risk, t.stderr, t.term_variance, t.term_bias_p, t.term_mid, t.term_cross, t.dominant)
        for t in traces
    ]
    paths.append(write_table(out / "sweep_terms.csv", TERM_COLUMNS, term_rows, fmt))
    ests = result.estimates
    paths.append(write_plot_data(out / "sweep_plot.csv", [e.n for e in ests], [e.risk for e in ests],
                                 [e.stderr for e in ests]))
    if plot:
        from knnlab.plotting import plot_sweep

        paths.append(plot_sweep(result, out / "sweep.png"))
    return paths


# --------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class GeometryTable:
    d: int
    u: np.ndarray
    closed: np.ndarray
    mc: np.ndarray
    stderr: np.ndarray

    @property
    def passes(self) -> np.ndarray:
        return np.abs(self.mc - self.closed) <= 3 * self.stderr

    def rows(self):
        return [(self.d, u, c, m, s, bool(p))
                for u, c, m, s, p in zip(self.u, self.closed, self.mc, self.stderr, self.passes)]


def geometry_table(d: int, mc_pairs: int, seed: int, points: int = 20) -> GeometryTable:
    u = np.arange(1, points + 1) / points
    est = geo.F_mc(u, d, mc_pairs, seed)
    return GeometryTable(d, u, np.asarray(geo.F_closed(u, d)), est.value, est.stderr)


def write_geometry(table: GeometryTable, out: Path, fmt: str = "csv", plot: bool = True) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    stem = f"geometry_d{table.d}"
    paths = [write_table(out / f"{stem}.csv", GEOMETRY_COLUMNS, table.rows(), fmt)]
    paths.append(write_plot_data(out / f"{stem}_plot.csv", table.u, table.mc, table.stderr))
    if plot:
        from knnlab.plotting import plot_geometry

        paths.append(plot_geometry(table.d, table.u, table.closed, table.mc, table.stderr, out / f"{stem}.png"))
    return paths


# --------------------------------------------------------------------------
# asymptotics

# (500, 10) .. (8000, 160): k/n fixed at 1/50 while n grows
MOMENT_SCALES = ((500, 10), (2000, 40), (8000, 160))


def asymptotics_rows(d: int, seed: int, reps: int = 400, gammas=(1.0, 1.5)):
    rows = []
    rows.append(("beta", "alpha=2;beta=3", asy.beta_fn(2, 3), 1 / 12, asy.beta_fn(2, 3) == 1 / 12))
    for n in (10, 100, 1000, 10_000):
        ratio = asy.stirling_ratio(n, d)
        scaled = n ** (3 / d) * ratio
        lim = asy.stirling_limit(d)
        rows.append(("stirling_scaled", f"n={n};d={d}", scaled, lim, 0.5 * lim <= scaled <= 2 * lim))
    for g in gammas:
        ests = [asy.nn_moment(g, n, k, d, reps, seed + i) for i, (n, k) in enumerate(MOMENT_SCALES)]
        ratios = [e.ratio for e in ests]
        c1 = 2 * max(ratios)
        stable = max(ratios) / min(ratios) < 2
        for (n, k), e in zip(MOMENT_SCALES, ests):
            rows.append(("nn_moment", f"gamma={g:g};n={n};k={k};d={d}", e.value, e.bound(c1),
                         stable and e.value <= e.bound(c1)))
    n, k = (10, 3) if d > 1 else (3, 2)
    for s in range(d):
        ct = asy.cross_term(n, k, d, s, 400_000, seed + 100 + s)
        rows.append(("cross_term", f"n={n};k={k};d={d};axis={s}", ct.direct,
                     ct.conditioned, ct.z <= 3))
    sched = [(2 ** e, k_schedule(1.5, d, 2 ** e)) for e in range(8, 13)]
    rate = asy.cross_term_rate(d, sched, 100, seed + 200)
    rows.append(("cross_term_rate", f"d={d};p=1.5", rate.slope, 3 / d - 0.5, rate.slope >= 3 / d - 0.5))
    spec = geo.constants(d)
    chk = geo.density_bound_check(d, 200)
    rows.append(("density_bound", f"d={d};c3={spec.c3!r}", chk.max_ratio, 1.0, chk.pass_))
    return rows


def write_asymptotics(d: int, out: Path, seed: int, fmt: str = "csv", plot: bool = True,
                      reps: int = 400) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    rows = asymptotics_rows(d, seed, reps)
    paths = [write_table(out / f"asymptotics_d{d}.csv", ASYMPTOTICS_COLUMNS, rows, fmt)]
    ns = np.unique(np.geomspace(1, 1e5, 40).astype(int))
    scaled = [n ** (3 / d) * asy.stirling_ratio(int(n), d) for n in ns]
    paths.append(write_plot_data(out / f"asymptotics_d{d}_plot.csv", ns, scaled, [0.0] * len(ns)))
    if plot:
        from knnlab.plotting import plot_stirling

        paths.append(plot_stirling(d, ns, scaled, asy.stirling_limit(d), out / f"asymptotics_d{d}.png"))
    return paths


def all_pass(rows, column: int = -1) -> bool:
    return all(bool(r[column]) for r in rows) and not any(
        isinstance(v, float) and math.isnan(v) for r in rows for v in r
    )
