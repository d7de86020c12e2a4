"""Command-line entry point: ``qrl <subcommand>``.

Exit status: 0 success, 1 invalid input, 2 verification failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .environments import MazeFormatError
from .harness import ConfigError, ExperimentConfig, VerificationFailure, derive_seeds, load_config, run

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="directory for CSV, summary and config echo")
    p.add_argument("--workers", type=int, help="parallel runs (results merge in seed order)")
    p.add_argument("--master-seed", type=int, help="master seed for derived per-run seeds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-oracle", help="check the two-game oracle against the direct phase oracle")
    p.add_argument("maze", type=Path)
    _common(p)

    p = sub.add_parser("explore", help="quantum exploration runs on a maze")
    p.add_argument("maze", type=Path)
    p.add_argument("--budget", type=int, help="interaction steps per run (default 2M*ceil(8 sqrt N))")
    p.add_argument("--seeds", type=int, default=10, help="number of derived seeds")
    p.add_argument("--c-stop", type=float, default=30.0)
    _common(p)

    p = sub.add_parser("learn", help="hybrid vs classical learner at matched budget")
    p.add_argument("config", type=Path)
    _common(p)

    p = sub.add_parser("metalearn", help="metaparameter search over an eval table")
    p.add_argument("config", type=Path)
    _common(p)
    return parser


def _config(args: argparse.Namespace) -> ExperimentConfig:
    if args.command in ("learn", "metalearn"):
        cfg = load_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError("experiment", f"config is for {cfg.kind!r}, not {args.command!r}")
        if args.master_seed is not None and not isinstance(cfg.raw.get("seeds"), list):
            cfg.master_seed = args.master_seed
            cfg.seeds = derive_seeds(args.master_seed, len(cfg.seeds))
    else:
        master = args.master_seed or 0
        count = getattr(args, "seeds", 1)
        if count is None or count < 1:
            raise ConfigError("seeds", "must be positive")
        cfg = ExperimentConfig(args.command, args.maze, derive_seeds(master, count), master)
        if args.command == "explore":
            if args.budget is not None and args.budget <= 0:
                raise ConfigError("budget", "must be positive")
            cfg.total_steps = args.budget
            cfg.c_stop = args.c_stop
        cfg.raw = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    if args.out is not None:
        cfg.out = args.out
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("workers", "must be positive")
        cfg.workers = args.workers
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        report = run(cfg)
    except (ConfigError, MazeFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except VerificationFailure as exc:
        print(f"VERIFICATION FAILED: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    for line in report.lines:
        print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
