"""``nilquant`` command line.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 invalid configuration
(nothing written), 3 numerical precondition violated (report written with a
diagnostic).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3
THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _apply_thread_setting() -> str | None:
    """Propagate ``NILQUANT_THREADS`` to the BLAS pools; returns an error message when invalid."""
    raw = os.environ.get("NILQUANT_THREADS")
    if raw is None:
        return None
    try:
        count = int(raw)
    except ValueError:
        count = 0
    if count < 1:
        return f"NILQUANT_THREADS must be a positive integer, got {raw!r}"
    for var in THREAD_VARIABLES:
        os.environ[var] = str(count)
    return None


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nilquant", description="Run numerical quantization scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the scenario named in a configuration file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (overrides [output] dir)")
    run.add_argument("--seed", help="unsigned 64-bit seed (overrides [scenario] seed)")
    run.add_argument("--format", choices=("json", "csv", "both"))
    sub.add_parser("list", help="list scenarios and their parameters")
    check = sub.add_parser("check", help="re-evaluate the verdicts of a JSON report")
    check.add_argument("--report", required=True)
    return parser


def _list() -> int:
    from .config import SCENARIOS

    for name, (section, table) in SCENARIOS.items():
        print(f"{name}  [{section}]")
        for key, param in table.items():
            print(f"    {key} = {param.default!r:<12} {param.help}")
    return EXIT_PASS


def _check(path) -> int:
    from .report import check_report

    try:
        with open(path) as fh:
            report = json.load(fh)
        failing = check_report(report)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot check {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if failing:
        print("FAIL: " + ", ".join(failing))
        return EXIT_FAIL
    print("PASS")
    return EXIT_PASS


def _run(args) -> int:
    import dataclasses

    from ..errors import ConfigError
    from .config import load_config, parse_seed

    try:
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = parse_seed(args.seed)
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.format is not None:
            overrides["fmt"] = args.format
        config = dataclasses.replace(config, **overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from . import run_scenario
    from .report import write_report

    report = run_scenario(config)
    for path in write_report(report, config.out_dir, config.fmt):
        print(f"wrote {path}")
    if report["status"] == "error":
        print(f"precondition violated: {report['diagnostic']}", file=sys.stderr)
        return EXIT_PRECONDITION
    for name, verdict in report["verdicts"].items():
        mark = "PASS" if verdict["passed"] else "FAIL"
        print(f"{mark}  {name}: {verdict['value']} {verdict['comparison']} {verdict['tolerance']}")
    return EXIT_PASS if report["status"] == "pass" else EXIT_FAIL


def main(argv=None) -> int:
    problem = _apply_thread_setting()
    if problem:
        print(f"error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    args = _parser().parse_args(argv)
    if args.command == "list":
        return _list()
    if args.command == "check":
        return _check(args.report)
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
