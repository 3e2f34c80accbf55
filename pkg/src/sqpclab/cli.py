"""Command-line front end: configure an experiment, run it, emit a report.

Output formats: `table` is human-oriented and not schema-stable; `json`
follows the documented schema (see README) and is byte-deterministic for a
given spec; `csv` emits one fixed header row plus one data row, spec columns
(prefixed `spec_`) followed by aggregate columns in declaration order.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from enum import Enum

from .adversary import ATTACK_NAMES
from .harness import (
    AggregateReport,
    ExperimentSpec,
    ValidationError,
    run_experiment,
)


class OutputFormat(Enum):
    TABLE = "table"
    JSON = "json"
    CSV = "csv"


_SPEC_FIELDS = (
    "protocol",
    "attack",
    "secret_bits",
    "rounds_factor",
    "p_ctrl",
    "p_detect",
    "trials",
    "seed",
    "threshold",
    "secrets",
)

_AGGREGATE_FIELDS = (
    "trials",
    "detection_rate",
    "detection_stderr",
    "abort_rate",
    "insufficient_rounds_rate",
    "completed_trials",
    "wrong_result_rate",
    "wrong_result_stderr",
    "secret_recovery_rate",
    "case1_rounds_total",
    "case1_errors_total",
    "case1_error_rate",
    "detection_by_trap_count",
)

CSV_HEADER = tuple(f"spec_{f}" for f in _SPEC_FIELDS) + _AGGREGATE_FIELDS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqpclab",
        description="Run a private-comparison protocol experiment.",
    )
    parser.add_argument(
        "--protocol", required=True, choices=("jiang", "improved"),
        help="protocol variant to execute",
    )
    parser.add_argument(
        "--attack", default="none", choices=ATTACK_NAMES,
        help="channel strategy (default: none)",
    )
    parser.add_argument(
        "--secret-bits", type=int, default=8, metavar="L",
        help="length of each secret in bits (default: 8)",
    )
    parser.add_argument(
        "--rounds-factor", type=int, default=None, metavar="F",
        help="Bell pairs per secret bit (default: 5 for jiang, 11 for improved)",
    )
    parser.add_argument(
        "--trials", type=int, default=1000, help="Monte Carlo trials (default: 1000)"
    )
    parser.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    parser.add_argument(
        "--p-ctrl", type=float, default=0.5, metavar="P",
        help="per-round probability of CTRL (default: 0.5)",
    )
    parser.add_argument(
        "--p-detect", type=float, default=None, metavar="P",
        help="probability a SIFT round is a trap round; improved protocol only"
        " (default: 0.5)",
    )
    parser.add_argument(
        "--secrets", default="random", metavar="MODE",
        help="equal | unequal | random | explicit:HEX,HEX (default: random)",
    )
    parser.add_argument(
        "--threshold", type=float, default=0.0,
        help="abort threshold for check error rates (default: 0.0)",
    )
    parser.add_argument(
        "--output", default="table", choices=("table", "json", "csv"),
        help="report format (default: table)",
    )
    return parser


def parse_args(argv: list[str]) -> tuple[ExperimentSpec, OutputFormat]:
    """Map flags to a validated ExperimentSpec plus the chosen output format."""
    args = build_parser().parse_args(argv)
    if args.p_detect is not None and args.protocol == "jiang":
        raise ValidationError("--p-detect is not accepted for the jiang protocol")
    spec = ExperimentSpec(
        protocol=args.protocol,
        attack=args.attack,
        secret_bits=args.secret_bits,
        rounds_factor=args.rounds_factor,
        p_ctrl=args.p_ctrl,
        p_detect=0.5 if args.p_detect is None else args.p_detect,
        trials=args.trials,
        seed=args.seed,
        threshold=args.threshold,
        secrets=args.secrets,
    )
    spec.validate()
    return spec, OutputFormat(args.output)


def emit_report(report: AggregateReport, fmt: OutputFormat) -> str:
    if fmt is OutputFormat.JSON:
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt is OutputFormat.CSV:
        return _emit_csv(report)
    return _emit_table(report)


def _emit_csv(report: AggregateReport) -> str:
    data = report.to_dict()
    row = []
    for name in _SPEC_FIELDS:
        row.append(_csv_cell(data["spec"][name]))
    for name in _AGGREGATE_FIELDS:
        value = data[name]
        if name == "detection_by_trap_count":
            value = json.dumps(value, sort_keys=True, separators=(",", ":"))
        row.append(_csv_cell(value))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerow(row)
    return buffer.getvalue()


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value) if not isinstance(value, str) else value


def _fmt_rate(rate: float | None, stderr: float | None = None) -> str:
    if rate is None:
        return "n/a"
    if stderr is None:
        return f"{rate:.6f}"
    return f"{rate:.6f} +/- {stderr:.6f}"


def _emit_table(report: AggregateReport) -> str:
    spec = report.spec
    lines = []
    pairs = [
        ("protocol", spec.protocol),
        ("attack", spec.attack),
        ("secret bits", spec.secret_bits),
        ("rounds", f"{spec.num_rounds()} (factor {spec.resolved_rounds_factor()})"),
        ("p_ctrl / p_detect", f"{spec.p_ctrl} / {spec.p_detect}"),
        ("threshold", spec.threshold),
        ("secrets", spec.secrets),
        ("trials", report.trials),
        ("seed", spec.seed),
        ("detection rate", _fmt_rate(report.detection_rate, report.detection_stderr)),
        ("abort rate", _fmt_rate(report.abort_rate)),
        ("insufficient rounds", _fmt_rate(report.insufficient_rounds_rate)),
        ("completed trials", report.completed_trials),
        ("wrong result rate", _fmt_rate(report.wrong_result_rate, report.wrong_result_stderr)),
        ("secret recovery rate", _fmt_rate(report.secret_recovery_rate)),
        ("case-1 rounds / errors", f"{report.case1_rounds_total} / {report.case1_errors_total}"),
        ("case-1 error rate", _fmt_rate(report.case1_error_rate)),
    ]
    width = max(len(name) for name, _ in pairs)
    for name, value in pairs:
        lines.append(f"{name:<{width}}  {value}")
    if report.detection_by_trap_count:
        lines.append("")
        lines.append(f"{'k':>4} {'trials':>7} {'detected':>9} {'rate':>9} {'predicted':>10}")
        for row in report.detection_by_trap_count:
            lines.append(
                f"{row.k:>4} {row.trials:>7} {row.detected:>9} "
                f"{row.detection_rate:>9.4f} {row.predicted:>10.4f}"
            )
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        spec, fmt = parse_args(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(spec)
    sys.stdout.write(emit_report(report, fmt))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
