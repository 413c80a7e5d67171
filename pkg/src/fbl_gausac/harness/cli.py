"""Command-line entry point ``fbl-gausac``.

Exit codes: 0 success, 1 configuration error, 2 verification failure,
3 I/O error.  The default worker count comes from ``FBL_GAUSAC_WORKERS``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import ConfigError
from ..parallel import WORKERS_ENV, default_workers
from .config import MODES, load_config
from .runner import EXIT_CONFIG, EXIT_IO, EXIT_OK, rows_to_csv, rows_to_json, run


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fbl-gausac",
        description="Finite-blocklength rate expansions and Monte Carlo simulation for the Gaussian MAC and RAC.",
        epilog=f"Exit codes: 0 ok, 1 config error, 2 verification failure, 3 I/O error. "
        f"{WORKERS_ENV} sets the default worker count.",
    )
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="TOML experiment configuration")
    p.add_argument("--out", help="output CSV path (overrides the config; '-' for stdout)")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--workers", type=int, help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    p.add_argument("--json", action="store_true", help="also write a JSON mirror next to the CSV")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    if cfg.mode != args.mode:
        print(f"config error: mode: file says {cfg.mode!r}, command line says {args.mode!r}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("config error: --seed must lie in [0, 2^64)", file=sys.stderr)
        return EXIT_CONFIG
    workers = args.workers if args.workers is not None else default_workers()
    if workers < 1:
        print("config error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG
    cfg = cfg.with_overrides(seed=args.seed, out=args.out)

    result = run(cfg, workers)
    text = rows_to_csv(result.rows)
    try:
        if cfg.out in (None, "-"):
            sys.stdout.write(text)
        else:
            out = Path(cfg.out)
            out.write_text(text, encoding="utf-8")
            if args.json:
                out.with_suffix(".json").write_text(rows_to_json(result.rows), encoding="utf-8")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for f in result.failures:
        print(f"failed: {f}", file=sys.stderr)
    return result.status if result.status else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
