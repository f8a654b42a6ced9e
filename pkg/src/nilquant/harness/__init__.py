"""Scenario harness: configuration, runners, reports and the command line."""
from __future__ import annotations

import time
from datetime import datetime, timezone

import numpy as np

from ..errors import NumericalPreconditionError
from .config import ScenarioConfig, default_config, load_config, parse_config
from .report import build_report, check_report, convergence_table, write_report
from .scenarios import RUNNERS, ScenarioResult


def run_scenario(config: ScenarioConfig) -> dict:
    """Run ``config`` and return the report dict; precondition failures become an ``error`` report."""
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    clock = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    try:
        result, diagnostic = RUNNERS[config.name](config.params, rng), None
    except NumericalPreconditionError as exc:
        result, diagnostic = None, f"{type(exc).__name__}: {exc}"
    return build_report(config, result, diagnostic, started, round(time.perf_counter() - clock, 3))


__all__ = ["ScenarioConfig", "ScenarioResult", "build_report", "check_report", "convergence_table",
           "default_config", "load_config", "parse_config", "run_scenario", "write_report"]
