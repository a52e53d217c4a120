#!/usr/bin/env python3
"""
Forge Harness
Command-line entry point: forge levels, verify them, probe the oracle, simulate the chain.

Exit codes: 0 on success, 1 on hypothesis-violation diagnostics (flagged
verification, exhausted level search, inconsistent estimates), 2 on invalid input.
"""
import argparse
import logging
import sys
from typing import List, Optional

from rich.console import Console

from core.exceptions import (
    ChainLengthExceeded,
    ConfigError,
    EstimationConsistencyError,
    ForgeError,
    LevelSearchExhausted,
    SchemaError,
)
from core.experiment_handler import (
    ExperimentConfig,
    ExperimentHandler,
    ProbeConfig,
    SimulateConfig,
    VerifyConfig,
)
from core.reports import FORMATS
from core.run_logger import RunLogger
from utils import settings
from utils.logger_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DIAGNOSTIC = 1
EXIT_INVALID = 2

DIAGNOSTIC_ERRORS = (LevelSearchExhausted, EstimationConsistencyError, ChainLengthExceeded)


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so run_cli can return a code"""

    def error(self, message):
        raise ConfigError("arguments", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="forge_cli", description=__doc__.strip().splitlines()[1])
    parser.add_argument("--log-level", default=None, help="Logging level (default FORGE_LOG_LEVEL)")
    parser.add_argument("--log-dir", default=None, help="Log directory (default FORGE_LOG_DIR)")
    parser.add_argument("--run-log-dir", default=None, help="Run ledger directory (default FORGE_RUN_LOG_DIR)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = sub.add_parser("forge", help="Build levels and write a ForgeResult")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--samples", type=int, default=settings.DEFAULT_SAMPLES)
    p.add_argument("--confidence", type=float, default=settings.DEFAULT_CONFIDENCE)
    p.add_argument("--predictor", default="kt:2", help="kt:<order>, empirical:<order> or constant:<p>")
    p.add_argument("--stop-rule", default="always", help="always or delayed:<t0>")
    p.add_argument("--n-cap", type=int, default=settings.DEFAULT_N_CAP)
    p.add_argument("--exact-threshold", type=int, default=settings.DEFAULT_EXACT_THRESHOLD)
    p.add_argument("--exact-mass-tol", type=float, default=settings.DEFAULT_EXACT_MASS_TOL)
    p.add_argument("--exact-path-budget", type=int, default=settings.DEFAULT_EXACT_PATH_BUDGET)
    p.add_argument("--max-trial-steps", type=int, default=settings.DEFAULT_MAX_TRIAL_STEPS)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", dest="fmt", choices=FORMATS, default="json")

    p = sub.add_parser("verify", help="Re-check a ForgeResult on fresh samples")
    p.add_argument("--in", dest="source", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, default=settings.DEFAULT_SAMPLES)
    p.add_argument("--confidence", type=float, default=settings.DEFAULT_CONFIDENCE)
    p.add_argument("--suffixes", type=int, default=20)
    p.add_argument("--prefixes", type=int, default=100)
    p.add_argument("--oracle-length", type=int, default=8)
    p.add_argument("--max-trial-steps", type=int, default=settings.DEFAULT_MAX_TRIAL_STEPS)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", dest="fmt", choices=FORMATS, default="json")

    p = sub.add_parser("probe", help="Oracle equivalence, continuity, Markov-order and reset checks")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--coding", default=None, help="Coding or ForgeResult JSON (default f^(0))")
    p.add_argument("--suffixes", type=int, default=20)
    p.add_argument("--prefixes", type=int, default=100)
    p.add_argument("--oracle-length", type=int, default=8)
    p.add_argument("--markov-extra", type=int, default=4)
    p.add_argument("--reset-length", type=int, default=100_000)
    p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="Sample a stationary coded trajectory to CSV")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--length", type=int, default=1000)
    p.add_argument("--coding", default=None, help="Coding or ForgeResult JSON (default f^(0))")
    p.add_argument("--out", default=None)
    return parser


def _workers(requested: Optional[int]) -> int:
    cap = settings.default_workers()
    if requested is None:
        return cap
    if requested < 1:
        raise ConfigError("threads", f"must be at least 1, got {requested}")
    return min(requested, cap)


def _dispatch(args: argparse.Namespace, handler: ExperimentHandler) -> bool:
    if args.command == "forge":
        return handler.run_forge(ExperimentConfig(
            seed=args.seed,
            levels=args.levels,
            samples=args.samples,
            confidence=args.confidence,
            predictor=args.predictor,
            stop_rule=args.stop_rule,
            n_cap=args.n_cap,
            exact_threshold=args.exact_threshold,
            exact_mass_tol=args.exact_mass_tol,
            exact_path_budget=args.exact_path_budget,
            max_trial_steps=args.max_trial_steps,
            workers=_workers(args.threads),
            out=args.out,
            fmt=args.fmt,
        ))
    if args.command == "verify":
        return handler.run_verify(VerifyConfig(
            source=args.source,
            seed=args.seed,
            samples=args.samples,
            confidence=args.confidence,
            suffixes=args.suffixes,
            prefixes=args.prefixes,
            oracle_length=args.oracle_length,
            max_trial_steps=args.max_trial_steps,
            workers=_workers(args.threads),
            out=args.out,
            fmt=args.fmt,
        ))
    if args.command == "probe":
        return handler.run_probe(ProbeConfig(
            seed=args.seed,
            coding=args.coding,
            suffixes=args.suffixes,
            prefixes=args.prefixes,
            oracle_length=args.oracle_length,
            markov_extra=args.markov_extra,
            reset_length=args.reset_length,
            out=args.out,
        ))
    return handler.run_simulate(SimulateConfig(
        seed=args.seed,
        length=args.length,
        coding=args.coding,
        out=args.out,
    ))


def run_cli(argv: Optional[List[str]] = None, console: Optional[Console] = None) -> int:
    """Parse argv, run one subcommand and return its exit code"""
    console = console or Console(stderr=True)
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        console.print(f"[red]Invalid arguments: {e}[/red]")
        return EXIT_INVALID
    except SystemExit as e:
        # --help
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID

    setup_logging("", log_dir=args.log_dir, level=args.log_level)
    handler = ExperimentHandler(RunLogger(args.run_log_dir), console)
    try:
        flagged = _dispatch(args, handler)
    except DIAGNOSTIC_ERRORS as e:
        console.print(f"[yellow]Diagnostic: {e}[/yellow]")
        return EXIT_DIAGNOSTIC
    except (ConfigError, SchemaError) as e:
        console.print(f"[red]Invalid input in field '{e.field}': {e}[/red]")
        return EXIT_INVALID
    except ForgeError as e:
        console.print(f"[red]Invalid input: {e}[/red]")
        return EXIT_INVALID
    except OSError as e:
        console.print(f"[red]Cannot access file: {e}[/red]")
        return EXIT_INVALID

    if flagged:
        console.print("[yellow]Result flagged; see the report for details[/yellow]")
        return EXIT_DIAGNOSTIC
    return EXIT_OK


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
