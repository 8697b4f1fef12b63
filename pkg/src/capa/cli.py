"""Command-line entry point: ``capa {gain,sweep-aperture,sweep-occupancy,region,verify}``.

Exit status: 0 success, 1 usage error, 2 quadrature convergence failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import experiments
from .config import load_config
from .errors import ConvergenceError, UsageError
from .report import to_csv

EXIT_OK, EXIT_USAGE, EXIT_CONVERGENCE, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("capa")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config (INI); defaults used if omitted")
    common.add_argument("--out", metavar="PATH", help="CSV output path (default: [output] path or stdout)")
    common.add_argument("--seed", type=int, help="override [oracle] seed")
    common.add_argument("--grid", type=int, help="override [oracle] grid (cells per axis)")
    common.add_argument("--trials", type=int, help="override [oracle] trials")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="capa", description="Continuous-aperture uplink capacity experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("gain", parents=[common], help="quadrature vs closed-form channel gains")
    sub.add_parser("sweep-aperture", parents=[common], help="rates over square aperture side")
    sub.add_parser("sweep-occupancy", parents=[common], help="SPD sum capacity over occupation ratio")
    sub.add_parser("region", parents=[common], help="two-user capacity-region boundary")
    sub.add_parser("verify", parents=[common], help="run the operator and Monte Carlo oracle suites")
    return p


def _apply_overrides(cfg, args):
    changes = {k: v for k, v in (("seed", args.seed), ("grid", args.grid), ("trials", args.trials)) if v is not None}
    if changes.get("grid", 2) < 2 or changes.get("trials", 2) < 2:
        raise UsageError("--grid and --trials must be >= 2")
    if changes:
        cfg = dataclasses.replace(cfg, oracle=dataclasses.replace(cfg.oracle, **changes))
    return cfg


def _emit(text: str, args, cfg):
    out = args.out or cfg.output
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    cmd = args.command
    if cmd == "gain":
        rows = experiments.gain_rows(cfg)
        _emit(to_csv(rows), args, cfg)
        failed = [r for r in rows if r["status"] != "ok"]
        for r in failed:
            log.error("quadrature did not converge for user %s at value %s", r["user"], r["value"])
        return EXIT_CONVERGENCE if failed else EXIT_OK
    if cmd == "sweep-aperture":
        rows = experiments.sweep_aperture_rows(cfg)
    elif cmd == "sweep-occupancy":
        rows = experiments.sweep_occupancy_rows(cfg)
    elif cmd == "region":
        rows = experiments.region_rows(cfg)
    else:
        results = experiments.verify(cfg)
        _emit(to_csv([dataclasses.asdict(r) for r in results]), args, cfg)
        for r in results:
            log.info("%-40s %s residual=%.3e tol=%.1e", r.suite, "PASS" if r.passed else "FAIL", r.residual, r.tolerance)
        return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY
    cols = list(experiments.RESULT_COLUMNS) if cmd != "region" else None
    if cols is not None:
        cols += [c for c in rows[0] if c not in cols]
    _emit(to_csv(rows, cols), args, cfg)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"capa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return run(args)
    except UsageError as exc:
        print(f"capa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"capa: quadrature failed: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
