"""Walk-forward evaluation and the H1/H2 comparison.

``n_windows`` evaluation windows end at ``last``, ``last - step``, ...; each
splits its history into ``n_folds`` expanding-train folds with one horizon
of test weeks apiece. A window's variance-weighted score blends the weighted
mean and spread of its fold MAPEs; the final score averages the windows.
Overlapping windows share forecast origins, so each origin is fitted once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..dataset import Dataset
from ..errors import DataError
from ..metrics import (FoldScore, accuracy_uplift, closure_error_summary, final_score, mape,
                       sliding_folds, variance_weighted_score)
from .audit import LeakageAudit
from .config import PipelineConfig
from .run import OriginForecast, RunCache, forecast_at


@dataclass
class FoldResult:
    index: int
    origin: int
    test: tuple[int, int]
    weight: float
    mape: float


@dataclass
class WindowResult:
    end_week: int
    folds: list[FoldResult]
    score: float


@dataclass
class EvalResult:
    variant: str
    windows: list[WindowResult]
    final_score: float
    forecasts: dict[int, OriginForecast] = field(default_factory=dict, repr=False)

    def fold_mapes(self, window: int = -1) -> list[float]:
        return [f.mape for f in self.windows[window].folds]


def window_plan(dataset: Dataset, config: PipelineConfig) -> list[tuple[int, list]]:
    """(end week, folds) per evaluation window, oldest window first."""
    ev = config.eval
    first, last = dataset.first_week, dataset.last_week
    plan = []
    for i in reversed(range(ev.n_windows)):
        end = last - i * ev.window_step
        folds = sliding_folds((first, end), ev.n_folds, ev.horizon, ev.min_train, ev.weights())
        plan.append((end, folds))
    return plan


def evaluation_origins(dataset: Dataset, config: PipelineConfig) -> list[int]:
    return sorted({f.origin for _, folds in window_plan(dataset, config) for f in folds})


def evaluate(dataset: Dataset, config: PipelineConfig, variant: str | None = None,
             audit: LeakageAudit | None = None, cache: RunCache | None = None) -> EvalResult:
    variant = variant or config.variant
    try:
        plan = window_plan(dataset, config)
    except DataError as exc:
        raise DataError(f"dataset too short for walk-forward evaluation: {exc}") from exc
    actual = dataset.collections()
    forecasts: dict[int, OriginForecast] = {}
    windows = []
    for end, folds in plan:
        results = []
        for fold in folds:
            if fold.origin not in forecasts:
                forecasts[fold.origin] = forecast_at(dataset, fold.origin, config, variant, audit, cache)
            pred = forecasts[fold.origin].forecast
            truth = actual.window(*fold.test)
            results.append(FoldResult(fold.index, fold.origin, fold.test, fold.weight, mape(truth, pred)))
        score = variance_weighted_score([FoldScore(r.index, r.mape, r.weight) for r in results], config.eval.alpha)
        windows.append(WindowResult(end, results, score))
    return EvalResult(variant, windows, final_score([w.score for w in windows]), forecasts)


@dataclass
class Comparison:
    h1: EvalResult
    h2: EvalResult
    uplift: float


def compare(dataset: Dataset, config: PipelineConfig, audit: LeakageAudit | None = None,
            cache: RunCache | None = None) -> Comparison:
    """H1 and H2 on identical windows and folds; uplift is H2's error reduction in percent."""
    h1 = evaluate(dataset, config, "h1", audit, cache)
    h2 = evaluate(dataset, config, "h2", audit, cache)
    return Comparison(h1, h2, accuracy_uplift(h1.final_score, h2.final_score))


def closure_accuracy(dataset: Dataset, result: EvalResult) -> dict:
    """Predicted vs actual close dates for invoices open at each H2 origin."""
    by_id = {inv.invoice_id: inv for inv in dataset.invoices}
    invoices, predicted = [], {}
    for origin in sorted(result.forecasts):
        fc = result.forecasts[origin]
        for inv_id, d in sorted(fc.predicted_close.items()):
            key = f"{origin}:{inv_id}"
            predicted[key] = d
            invoices.append(_Keyed(by_id[inv_id], key))
    return closure_error_summary(invoices, predicted)


class _Keyed:
    """An invoice viewed under a per-origin key (the same invoice can be open at several origins)."""

    def __init__(self, inv, key):
        self._inv = inv
        self.invoice_id = key

    def __getattr__(self, name):
        return getattr(self._inv, name)
