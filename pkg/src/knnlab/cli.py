"""``knnlab`` command line: sweep, geometry, asymptotics, verify."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

log = logging.getLogger("knnlab")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    p.add_argument("--out", type=Path, default=Path("knnlab-out"), help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figures")


def cmd_sweep(args) -> int:
    from knnlab.config import load_config
    from knnlab.rate_bench import sweep
    from knnlab.report import write_sweep

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_(master_seed=args.seed)
    if args.workers is not None:
        cfg = cfg.with_(workers=args.workers)
    res = sweep(cfg)
    for e in res.estimates:
        log.info("n=%d k=%d risk=%.6g se=%.3g", e.n, e.k, e.risk, e.stderr)
    paths = write_sweep(res, args.out, args.format, plot=not args.no_plot)
    fit = res.fit
    print(f"slope {fit.slope:.4f} +/- {fit.slope_stderr:.4f} (target {fit.target:.4f}, "
          f"band ±{cfg.slope_band}): {'PASS' if res.passed else 'FAIL'}")
    for p in paths:
        print(p)
    return 0 if res.passed else 1


def cmd_geometry(args) -> int:
    from knnlab.report import geometry_table, write_geometry

    table = geometry_table(args.d, args.mc, 0 if args.seed is None else args.seed, args.points)
    for p in write_geometry(table, args.out, args.format, plot=not args.no_plot):
        print(p)
    ok = bool(table.passes.all())
    print(f"d={args.d}: {int(table.passes.sum())}/{table.u.size} points within 3 stderr")
    return 0 if ok else 1


def cmd_asymptotics(args) -> int:
    from knnlab.report import write_asymptotics

    paths = write_asymptotics(args.d, args.out, 0 if args.seed is None else args.seed, args.format,
                              plot=not args.no_plot, reps=args.reps)
    for p in paths:
        print(p)
    return 0


def cmd_verify(args) -> int:
    from knnlab import acceptance

    selected = [int(c) for c in args.only.split(",")] if args.only else None
    results = acceptance.run(selected)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="knnlab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="risk sweep over n with a fitted log-log rate")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--workers", type=int, default=None)
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("geometry", help="closed-form vs Monte Carlo F(u)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mc", type=int, default=100_000, help="Monte Carlo pairs")
    p.add_argument("--points", type=int, default=20, help="number of u values")
    _common(p)
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("asymptotics", help="Beta/Stirling identities and neighbor-moment checks")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--reps", type=int, default=400)
    _common(p)
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--only", default="", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
