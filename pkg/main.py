import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from config import Config, ConfigError
from eventlog import AttributeSchema, EventLog, EventLogError
from metrics import compare, write_report
from pipeline import run_pripel
from xes import read_xes, save_xes

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """Argument parser that prints the full help and exits with EXIT_USAGE."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sensitivity(text: str):
    name, sep, value = text.partition("=")
    try:
        if not sep or not name:
            raise ValueError
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pripel", description="Differentially private event log anonymization.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    anonymize = commands.add_parser("anonymize", help="anonymize an XES event log")
    anonymize.add_argument("input", nargs="?", help="XES log to anonymize")
    anonymize.add_argument("--config", help="JSON config file; flags override it")
    anonymize.add_argument("--epsilon", type=float, help="privacy parameter of the variant query and default attribute epsilon")
    anonymize.add_argument("-n", "--max-depth", type=int, help="longest released variant (default 30)")
    anonymize.add_argument("-k", "--prune", type=int, help="pruning threshold of the prefix tree")
    anonymize.add_argument("--seed", type=int, help="master random seed")
    anonymize.add_argument("--schema", help="JSON sidecar attribute schema")
    anonymize.add_argument("--greedy-matching", action="store_true", help="greedy instead of optimal matching")
    anonymize.add_argument("--shift-scale", type=float, help="Laplace scale (ms) of the per-trace timestamp shift")
    anonymize.add_argument("--interval-scale", type=float, help="Laplace scale (ms) of the interval noise")
    anonymize.add_argument("--sensitivity", type=_sensitivity, action="append", default=[],
                           metavar="NAME=VALUE", help="sensitivity override for a numeric attribute")
    anonymize.add_argument("--out", help="output XES path")
    anonymize.add_argument("--report-json", help="run report path (default: next to the output)")
    anonymize.add_argument("--save-config", metavar="PATH",
                           help="write the effective config (file plus flags) as JSON, reusable with --config")
    anonymize.set_defaults(subparser=anonymize)

    report = commands.add_parser("report", help="compare an anonymized log with its original")
    report.add_argument("original")
    report.add_argument("anonymized")
    report.add_argument("--attr", action="append", default=[], help="boolean attribute to compare")
    report.add_argument("--bucket-hours", type=float, default=24.0, help="active cases bucket size")
    report.add_argument("--schema", help="JSON sidecar attribute schema")
    report.add_argument("--out", help="output prefix for <prefix>_series.csv and <prefix>_metrics.json")

    inspect = commands.add_parser("inspect", help="print log statistics")
    inspect.add_argument("log")
    inspect.add_argument("-n", "--max-depth", type=int, default=30, help="length to report coverage for")
    return parser


def _load_schema(path: Optional[str], default_epsilon: float) -> Optional[AttributeSchema]:
    return AttributeSchema.from_json(path, default_epsilon) if path else None


def _stem(path: str) -> str:
    return os.path.splitext(path)[0]


def _merge(args: argparse.Namespace) -> Config:
    """Load the config file, if any, and apply command-line overrides."""
    config = Config.from_file(args.config) if args.config else Config()
    overrides = [
        ((config.query, "epsilon"), args.epsilon),
        ((config.query, "max_depth"), args.max_depth),
        ((config.query, "prune"), args.prune),
        ((config.noise, "shift_scale"), args.shift_scale),
        ((config.noise, "interval_scale"), args.interval_scale),
        ((config.io, "input"), args.input),
        ((config.io, "output"), args.out),
        ((config.io, "schema"), args.schema),
        ((config.io, "report"), args.report_json),
    ]
    for (section, name), value in overrides:
        if value is not None:
            setattr(section, name, value)
    if args.seed is not None:
        config.seed = args.seed
    if args.greedy_matching:
        config.matching.mode = "greedy"
    config.noise.sensitivity.update(dict(args.sensitivity))
    return config


def _anonymize(args: argparse.Namespace) -> int:
    config = _merge(args)
    parser = args.subparser
    if config.query.epsilon is None:
        parser.error("--epsilon is required")
    if config.query.prune is None:
        parser.error("--prune/-k is required")
    if config.io.input is None:
        parser.error("an input log is required")
    config.validate()
    if args.save_config:
        config.save_to_file(args.save_config)
        logger.info("Saved effective config to %s", args.save_config)

    log = read_xes(config.io.input, _load_schema(config.io.schema, config.query.epsilon),  # type: ignore[arg-type]
                   config.query.epsilon)  # type: ignore[arg-type]
    anonymized, report = run_pripel(log, config)

    output = config.io.output or f"{_stem(config.io.input)}_anonymized.xes"
    report_path = config.io.report or f"{_stem(output)}_report.json"
    save_xes(anonymized, output)
    report.save_to_file(report_path)
    print(f"{report.original_traces} traces -> {report.query_sequences} released sequences -> "
          f"{report.output_traces} traces written to {output}")
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def _report(args: argparse.Namespace) -> int:
    schema = _load_schema(args.schema, 1.0)
    original = read_xes(args.original, schema)
    anonymized = read_xes(args.anonymized, schema)
    bucket = int(args.bucket_hours * 60 * 60 * 1000)
    if bucket <= 0:
        raise ConfigError("--bucket-hours must be positive")
    report = compare(original, anonymized, args.attr, bucket)
    series_path, metrics_path = write_report(report, args.out or f"{_stem(args.anonymized)}_utility")
    for attr, fractions in report.boolean_fractions.items():
        print(f"{attr}: original {fractions['original']}, anonymized {fractions['anonymized']}")
    for label, stats in report.case_durations_days.items():
        print(f"{label} case duration (days): avg {stats['avg']:.2f}, median {stats['median']:.2f}")
    print(f"active cases correlation: {report.active_cases_correlation}")
    print(f"wrote {series_path} and {metrics_path}")
    return EXIT_OK


def describe(log: EventLog, max_depth: int = 30) -> List[str]:
    """Summary lines for the inspect command."""
    lines = [f"{len(log)} traces, {log.num_events} events, {len(log.variants())} variants",
             f"{len(log.activity_universe)} activities"]
    lengths = np.array(log.trace_lengths())
    if lengths.size:
        lines.append(f"trace length min {lengths.min()}, median {np.median(lengths):g}, max {lengths.max()}")
        lines.append(f"{np.mean(lengths <= max_depth):.1%} of traces have at most {max_depth} events")
    return lines


def _inspect(args: argparse.Namespace) -> int:
    for line in describe(read_xes(args.log), args.max_depth):
        print(line)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "anonymize":
            return _anonymize(args)
        if args.command == "report":
            return _report(args)
        return _inspect(args)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except (EventLogError, OSError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
