"""Command-line entry point: ``clampedplate <subcommand> --config cfg.json``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness as H
from .bounds import BoundsError
from .geometry import GeometryError
from .spectra import ConvergenceError, EnumerationError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clampedplate", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="JSON experiment configuration")
    common.add_argument("--out", type=Path, help="output directory (default: config output.dir or ./out)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--no-cache", action="store_true", help="always recompute spectra")
    sub.add_parser("spectrum", parents=[common], help="compute the spectrum and write spectrum.csv")
    sub.add_parser("bounds", parents=[common], help="evaluate bounds and universal inequalities")
    conv = sub.add_parser("converge", parents=[common], help="finite-difference convergence study")
    conv.add_argument("--levels", type=int, default=3, help="number of grid levels (>= 2)")
    sub.add_parser("lemma", parents=[common], help="randomised moment-inequality sweep")
    sub.add_parser("report", parents=[common], help="everything, plus summary.md")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = H.parse_config(args.config.read_text())
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except H.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        config = config.with_seed(args.seed)
    out = args.out or Path(config.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    cache = None if args.no_cache else H.SpectrumCache(out)
    try:
        if args.command == "spectrum":
            s = H.get_spectrum(config.domain, config.solver.method, config.solver.h,
                               config.solver.count, config.seed, cache)
            path = H.write_spectrum(s, out)
            print(f"wrote {path} ({len(s)} eigenvalues, Gamma_1 = {s.eigenvalues[0]:.12g})")
            return EXIT_OK
        if args.command == "bounds":
            s = H.get_spectrum(config.domain, config.solver.method, config.solver.h,
                               config.solver.count, config.seed, cache)
            files, failures, notes, _ = H.evaluate_bounds(config, s, out)
            for n in notes:
                print(f"note: {n}")
            return _finish(files, failures)
        if args.command == "converge":
            table = H.converge(config, args.levels, cache)
            path = H.write_csv(out / "converge.csv", *table.table())
            print(f"wrote {path}")
            for j, v in enumerate(table.richardson):
                print(f"Gamma_{j + 1}: richardson {v:.12g}")
            return EXIT_OK
        if args.command == "lemma":
            sweep = H.lemma_sweep(config)
            path = H.write_csv(out / "lemma.csv", *sweep.table())
            print(f"wrote {path}; min ratio {sweep.min_ratio:.12g}")
            return EXIT_OK if sweep.passed else EXIT_CHECK_FAILED
        result = H.run(config, out, use_cache=cache is not None)
        for n in result.notes:
            print(f"note: {n}")
        return _finish(result.files, result.failures)
    except H.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, EnumerationError, GeometryError, BoundsError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def _finish(files, failures) -> int:
    for name, path in files.items():
        print(f"wrote {path}")
    for f in failures[:20]:
        print(f"FAIL: {f}")
    return EXIT_OK if not failures else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
