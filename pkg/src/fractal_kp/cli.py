"""Command-line entry point.

Every subcommand takes --config PATH and writes one artifact directory;
see the README for the configuration schema.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import parse_config
from .errors import ConfigError, FractalKPError
from .experiment import COMMANDS, run_experiment

_DESCRIPTIONS = {
    "gen-set": "generate the node family (and partner family) as CSV",
    "solve-chi": "solve the finite pole-condition system with base amplitudes",
    "solve-ieq": "solve the limiting integral equations with base amplitudes",
    "kp-field": "reconstruct u over the configured (x, y, t) grid",
    "residual": "field plus PDE residual report (spacing ladder with study=refine-h)",
    "kdv-probe": "reality / y-independence / conservation metrics in KdV mode",
    "spectrum-probe": "eigenvalue table of -d_xx + u against the candidate bands",
    "converge": "field differences across construction levels",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fractal-kp",
        description="KP/KdV fields from spectral data on Cantor/Sierpinski node families",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=_DESCRIPTIONS[name])
        cmd.add_argument("--config", required=True, type=Path, help="JSON configuration file")
        cmd.add_argument("--out", type=Path, default=None, help="artifact directory")
        cmd.add_argument("--jobs", type=int, default=None, help="parallel solve tasks")
        cmd.add_argument("--level", type=int, default=None, help="override the construction level")
        cmd.add_argument(
            "--dry-run", action="store_true", help="validate only; print the resolved config"
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2

    if args.dry_run:
        print(json.dumps(cfg.resolved, sort_keys=True, indent=2))
        return 0

    out = args.out if args.out is not None else Path(f"artifacts-{args.command}")
    try:
        run_experiment(cfg, out, command=args.command, jobs=args.jobs, level=args.level)
    except FractalKPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
