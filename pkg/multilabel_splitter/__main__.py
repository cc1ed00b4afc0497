"""
Main entry point for the multi-label splitter.

This module provides a command-line interface to the analyze, split, evaluate and
compare workflows. Reports are JSON on stdout (or the --out-report file); log
messages go to stderr.
"""

import argparse
import logging
import sys
from typing import List, Optional

from multilabel_splitter.commands import COMMAND_HANDLERS
from multilabel_splitter.config import (
    DEFAULT_SEED,
    FORMATS,
    METHODS,
    THREADS_ENV_VAR,
    RunConfig,
)
from multilabel_splitter.errors import SplitterError

logger = logging.getLogger("multilabel_splitter")


def _add_input_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", "-i", required=True, help="Data set file")
    parser.add_argument(
        "--format",
        "-f",
        choices=FORMATS,
        default="sparse-text",
        help="Data set format (default: sparse-text)",
    )
    parser.add_argument(
        "--out-report", help="Write the JSON report here instead of stdout"
    )


def _add_fold_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, help="Number of folds (default: 10)")
    folds = parser.add_mutually_exclusive_group()
    folds.add_argument(
        "--proportions", help="Comma-separated fold proportions summing to 1"
    )
    folds.add_argument("--targets", help="Comma-separated exact fold sizes")


def _add_method_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--constrained",
        action="store_true",
        help="Require every label with at least k examples in every fold",
    )
    parser.add_argument(
        "--seed", type=int, default=DEFAULT_SEED, help="Master random seed"
    )
    parser.add_argument(
        "--runs", type=int, help="Independent evolutionary runs (default: 5)"
    )
    parser.add_argument(
        "--threads",
        type=int,
        help=f"Fitness evaluation threads (default: ${THREADS_ENV_VAR} or 1)",
    )
    parser.add_argument(
        "--max-generations",
        type=int,
        help="Stop the evolutionary search after this many generations",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Multi-label data set splitter")
    parser.add_argument(
        "--verbose", "-v", action="store_true", help="Log progress to stderr"
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    # Analyze command
    analyze_parser = subparsers.add_parser(
        "analyze", help="Report label imbalance statistics of a data set"
    )
    _add_input_arguments(analyze_parser)

    # Split command
    split_parser = subparsers.add_parser("split", help="Split a data set into folds")
    _add_input_arguments(split_parser)
    _add_fold_arguments(split_parser)
    split_parser.add_argument(
        "--method", "-m", choices=METHODS, default="random", help="Splitting method"
    )
    _add_method_arguments(split_parser)
    split_parser.add_argument("--out-assignment", help="Assignment CSV output path")
    split_parser.add_argument(
        "--out-front", help="Pareto front JSON output path (moea only)"
    )
    split_parser.add_argument(
        "--oracle",
        action="store_true",
        help="Also compute the exhaustive optimum (tiny data sets only)",
    )
    split_parser.add_argument(
        "--timing", action="store_true", help="Add runtime_ms to the report"
    )

    # Evaluate command
    evaluate_parser = subparsers.add_parser(
        "evaluate", help="Score an existing assignment CSV"
    )
    _add_input_arguments(evaluate_parser)
    _add_fold_arguments(evaluate_parser)
    evaluate_parser.add_argument(
        "--assignment", "-a", required=True, help="Assignment CSV to evaluate"
    )
    evaluate_parser.add_argument(
        "--out-table", help="Write per-fold label counts as CSV"
    )

    # Compare command
    compare_parser = subparsers.add_parser(
        "compare", help="Run several methods and tabulate their measures"
    )
    _add_input_arguments(compare_parser)
    _add_fold_arguments(compare_parser)
    compare_parser.add_argument(
        "--methods",
        required=True,
        help=f"Comma-separated methods out of {','.join(METHODS)}",
    )
    _add_method_arguments(compare_parser)
    return parser


def main(argv: Optional[List[str]] = None) -> None:
    """Execute one sub-command from command line arguments."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    if not args.command:
        parser.print_help()
        sys.exit(1)

    try:
        config = RunConfig.from_args(args)
        COMMAND_HANDLERS[config.command](config)
    except SplitterError as e:
        logger.error(str(e))
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()
