"""End-to-end H1/H2 runs: ingest, fit, walk-forward evaluation, reports."""

from __future__ import annotations

import time
from typing import Any

from ..core import WeeklySeries
from ..dataset import Dataset
from ..errors import ValidationError
from .audit import LeakageAudit
from .config import PipelineConfig, from_dict, load_config, to_dict
from .evaluate import Comparison, EvalResult, compare, evaluate, evaluation_origins
from .ingest import ingest, ingest_config
from .report import compare_report, dumps, render_markdown, run_report, write_json
from .run import OriginForecast, RunCache, forecast_at


class Timer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def __call__(self, name: str):
        timer = self

        class _Span:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.timings[name] = timer.timings.get(name, 0.0) + time.perf_counter() - self.t0

        return _Span()


def run_pipeline(dataset: Dataset, config: PipelineConfig, variant: str | None = None,
                 audit: LeakageAudit | None = None, timer: Timer | None = None
                 ) -> tuple[WeeklySeries, dict[str, Any]]:
    """Walk-forward evaluation plus the live forecast from the last observed week."""
    variant = variant or config.variant
    timer = timer or Timer()
    cache = RunCache()
    with timer("evaluate"):
        result = evaluate(dataset, config, variant, audit, cache)
    with timer("forecast"):
        final = forecast_at(dataset, dataset.last_week, config, variant, audit, cache)
    return final.forecast, run_report(dataset, config, result, final, audit)


def run_h2(dataset: Dataset, config: PipelineConfig, audit: LeakageAudit | None = None,
           timer: Timer | None = None) -> tuple[WeeklySeries, dict[str, Any]]:
    if config.variant != "h2":
        raise ValidationError(f"run_h2 needs variant h2, config says {config.variant!r}")
    return run_pipeline(dataset, config, "h2", audit, timer)


def run_compare(dataset: Dataset, config: PipelineConfig, audit: LeakageAudit | None = None,
                timer: Timer | None = None) -> tuple[Comparison, dict[str, Any]]:
    """H1 vs H2 on the same folds, with both live forecasts."""
    timer = timer or Timer()
    cache = RunCache()
    with timer("compare"):
        cmp = compare(dataset, config, audit, cache)
    with timer("forecast"):
        f1 = forecast_at(dataset, dataset.last_week, config, "h1", audit, cache)
        f2 = forecast_at(dataset, dataset.last_week, config, "h2", audit, cache)
    return cmp, compare_report(dataset, config, cmp, f1, f2, audit)


__all__ = [
    "Comparison", "EvalResult", "LeakageAudit", "OriginForecast", "PipelineConfig", "RunCache", "Timer",
    "compare", "compare_report", "dumps", "evaluate", "evaluation_origins", "forecast_at", "from_dict",
    "ingest", "ingest_config", "load_config", "render_markdown", "run_compare", "run_h2", "run_pipeline",
    "run_report", "to_dict", "write_json",
]
