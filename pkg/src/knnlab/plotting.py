"""Figures for the CLI reports. Rendered off-screen with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps repeated runs byte-stable
_SAVE = dict(dpi=120, metadata={"Software": None})

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 10,
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def plot_sweep(result, path: str | Path) -> Path:
    """Risk against n on log-log axes with the fitted line and the target slope."""
    cfg, fit = result.config, result.fit
    ns = np.array([e.n for e in result.estimates], dtype=float)
    risk = np.array([e.risk for e in result.estimates])
    err = np.array([e.stderr for e in result.estimates])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.errorbar(ns, risk, yerr=err, fmt="o", ms=4, capsize=2, label="Monte Carlo risk")
        grid = np.geomspace(ns[0], ns[-1], 50)
        ax.plot(grid, np.exp(fit.intercept) * grid ** fit.slope, "-",
                label=f"fit: slope {fit.slope:.3f} ± {fit.slope_stderr:.3f}")
        anchor = np.exp(np.mean(fit.log_risk) - fit.target * np.mean(fit.log_n))
        ax.plot(grid, anchor * grid ** fit.target, "--", color="0.4", label=f"target slope {fit.target:.3f}")
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("expected squared L2 error")
        ax.set_title(f"{cfg.function_name}, sigma={cfg.sigma:g}, k rule {cfg.k_rule}")
        ax.legend()
        return _save(fig, path)


def plot_geometry(d: int, u, closed, mc, stderr, path: str | Path) -> Path:
    """Closed-form F(u) against its Monte Carlo estimate."""
    from knnlab.geometry_oracle import F_closed, constants

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        fine = np.linspace(0, 1, 400)
        ax.plot(fine, F_closed(fine, d), "-", label="closed form")
        ax.errorbar(u, mc, yerr=3 * np.asarray(stderr), fmt="o", ms=3, capsize=2, label="Monte Carlo ± 3 se")
        ax.axvline(constants(d).breakpoint, color="0.5", ls=":", label="branch point")
        ax.set_xlabel("u")
        ax.set_ylabel("F(u)")
        ax.set_title(f"clipped-ball volume measure, d = {d}")
        ax.legend()
        return _save(fig, path)


def plot_stirling(d: int, ns, scaled, limit: float, path: str | Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogx(ns, scaled, "o-", ms=3, label="n^(3/d) x ratio")
        ax.axhline(limit, color="0.4", ls="--", label="Gamma(1 + 3/d)")
        ax.set_xlabel("n")
        ax.set_title(f"d = {d}")
        ax.legend()
        return _save(fig, path)
