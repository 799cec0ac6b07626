#!/usr/bin/env python3
"""
frameprobe - Main Entry Point
CLI for validating, analyzing and probing linearized semantic frames.

Exit codes: 0 success, 1 operational error, 2 usage error.
"""

import argparse
import logging
import sys
from typing import List, Optional

from config.settings import (
    LOG_LEVELS,
    configure_logging,
    get_ce_epochs,
    get_ce_l2,
    get_ce_step_size,
    get_log_level,
    get_ood_prefix,
    get_prob_profile,
    get_seed,
    parse_seed,
)
from core.orchestrator import Orchestrator
from core.registry import load_default_commands, run_command
from services.confidence import normalize_mask
from services.corpus_io import DatasetFormat
from services.error_taxonomy import BUCKET_KEYS, ErrorType
from services.oracle_builder import OracleKind
from services.perturbation import ProbProfile, Variant
from services.records import RECORD_SCHEMA_HELP

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Raised by the parser instead of exiting."""

    def __init__(self, message: str, usage: str):
        self.message = message
        self.usage = usage
        super().__init__(message)


class FrameprobeParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors to main() instead of exiting."""

    def error(self, message: str):
        raise UsageError(message, self.format_usage())


def _argument_type(parse, label: str):
    def convert(value: str):
        try:
            return parse(value)
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"invalid {label}: {e}") from e
    convert.__name__ = label
    return convert


def _error_types(value: str) -> List[ErrorType]:
    if value.strip().lower() == "all":
        return list(ErrorType)
    return [ErrorType.parse(value)]


def _int_list(value: str) -> List[int]:
    items = [int(part) for part in value.split(",") if part.strip()]
    if not items or any(item < 1 for item in items):
        raise ValueError(f"expected positive integers separated by commas, got '{value}'")
    return items


def _fraction(value: str) -> float:
    number = float(value)
    if not 0.0 <= number < 1.0:
        raise ValueError(f"must be in [0, 1), got {number}")
    return number


def _add_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format",
        type=_argument_type(DatasetFormat, "format"),
        default=None,
        help="Dataset format: tsv, jsonl or frames (default: from the file suffix)",
    )


def _add_ood(parser: argparse.ArgumentParser, default_prefix: str) -> None:
    parser.add_argument("--ood-prefix", default=default_prefix,
                        help=f"Out-of-domain intent label prefix (default: {default_prefix})")
    parser.add_argument("--ood-label", dest="ood_labels", action="append", default=None,
                        help="Explicit out-of-domain intent label; repeatable, overrides --ood-prefix")


def _add_training(parser: argparse.ArgumentParser, seed: int) -> None:
    parser.add_argument("--epochs", type=int, default=get_ce_epochs())
    parser.add_argument("--step-size", type=float, default=get_ce_step_size())
    parser.add_argument("--l2", type=float, default=get_ce_l2())
    parser.add_argument("--seed", type=_argument_type(parse_seed, "seed"), default=seed)


def build_parser() -> FrameprobeParser:
    """Build the frameprobe argument parser with environment-backed defaults."""
    seed = get_seed()
    ood_prefix = get_ood_prefix()

    parser = FrameprobeParser(
        prog="frameprobe",
        description="Validate, analyze and probe linearized task-oriented semantic frames",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=RECORD_SCHEMA_HELP,
    )
    parser.add_argument("--log-level", choices=LOG_LEVELS, default=None,
                        help="Logging level (default: FRAMEPROBE_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("validate", help="Validity report for a frame file")
    p.add_argument("input")
    _add_format(p)
    p.add_argument("--out", help="Write <out>.json and <out>.md")

    for name, help_text in (("analyze", "First-error distribution of predictions"),
                            ("report", "Exact match / tree validity by depth, or error distribution")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("input", help="PredictionRecord JSONL")
        if name == "report":
            p.add_argument("--kind", choices=("em-tv", "errors"), default="em-tv")
        p.add_argument("--bucket-by", choices=BUCKET_KEYS, default="all")
        p.add_argument("--out", help="Write <out>.json and <out>.md instead of printing")
        _add_ood(p, ood_prefix)

    p = sub.add_parser("oracle", help="Build oracle source/target pair files")
    p.add_argument("input")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--kind", action="append", type=_argument_type(OracleKind, "oracle kind"),
                   help="span, struct or regular; repeatable (default: span and struct)")
    _add_format(p)

    p = sub.add_parser("perturb", help="Build a synthetic prediction corpus by error injection")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--type", action="append", type=_argument_type(_error_types, "error type"),
                   help="intent, slot, ood, mode, leaf or all; repeatable (default: all)")
    p.add_argument("--seed", type=_argument_type(parse_seed, "seed"), default=seed)
    p.add_argument("--prob-profile", type=_argument_type(ProbProfile.parse, "probability profile"),
                   default=ProbProfile(*get_prob_profile()),
                   help="correct_mean,incorrect_mean,jitter (default: 0.9,0.6,0.02)")
    p.add_argument("--correct-fraction", type=_argument_type(_fraction, "fraction"), default=0.0)
    p.add_argument("--variant", type=_argument_type(Variant, "variant"), default=None)
    p.add_argument("--ood-prefix", default=ood_prefix)
    _add_format(p)

    p = sub.add_parser("ce-train", help="Train the confidence classifier")
    p.add_argument("input", help="PredictionRecord JSONL with token_probs")
    p.add_argument("--model", required=True, help="Model JSON output path")
    p.add_argument("--features", type=_argument_type(lambda v: normalize_mask(v.split(",")), "features"),
                   default=None, help="Comma-separated subset of length,validity,confidence")
    p.add_argument("--tune-threshold", metavar="DEV", default=None,
                   help="Tune the margin threshold for F1 on this dev file")
    _add_training(p, seed)

    p = sub.add_parser("ce-eval", help="Evaluate a trained confidence model")
    p.add_argument("input")
    p.add_argument("--model", required=True)
    p.add_argument("--out")

    p = sub.add_parser("ce-ablate", help="Feature ablation table")
    p.add_argument("train")
    p.add_argument("test")
    p.add_argument("--out")
    _add_training(p, seed)

    p = sub.add_parser("synth", help="Generate a synthetic gold dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=_argument_type(parse_seed, "seed"), default=seed)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--ood-rate", type=_argument_type(_fraction, "rate"), default=0.05)
    p.add_argument("--depths", type=_argument_type(_int_list, "depth list"), default=None,
                   help="Cycle exact gold depths, e.g. 1,2,3,4,5,6")

    p = sub.add_parser("stats", help="Dataset profile")
    p.add_argument("input")
    p.add_argument("--out")
    _add_format(p)

    return parser


def _flatten_types(values: Optional[List[List[ErrorType]]]) -> List[ErrorType]:
    if not values:
        return list(ErrorType)
    flat: List[ErrorType] = []
    for group in values:
        for error_type in group:
            if error_type not in flat:
                flat.append(error_type)
    return flat


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point for frameprobe."""
    try:
        parser = build_parser()
        default_level = get_log_level()
    except ValueError as e:
        print(f"frameprobe: configuration error: {e}", file=sys.stderr)
        return EXIT_FAILURE

    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(e.usage)
        print(f"frameprobe: error: {e.message}\n", file=sys.stderr)
        sys.stderr.write(RECORD_SCHEMA_HELP)
        return EXIT_USAGE

    configure_logging(args.log_level or default_level)
    if args.command == "perturb":
        args.type = _flatten_types(args.type)
    if args.command == "oracle" and not args.kind:
        args.kind = [OracleKind.SPAN, OracleKind.STRUCT]

    load_default_commands(Orchestrator())
    return EXIT_OK if run_command(args.command, args) else EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
