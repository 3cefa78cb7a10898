"""Forecast scoring: MAPE, sliding folds, variance-weighted fold scores,
the blended custom loss, accuracy uplift and invoice-level deviations."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Invoice, Segment, WeeklySeries
from .errors import DataError, MissingDataError, ValidationError

DEFAULT_FOLD_WEIGHTS = (1 / 6, 2 / 6, 3 / 6)
WEIGHT_TOL = 1e-9


class MetricError(DataError):
    """A metric is undefined for the given inputs (e.g. a zero actual)."""


def mape(actual: WeeklySeries, predicted: WeeklySeries) -> float:
    """Mean absolute percentage error in percent, over aligned weeks."""
    if len(actual) == 0:
        raise MetricError("mape of an empty series")
    if actual.start != predicted.start or len(actual) != len(predicted):
        raise ValidationError(f"series are not aligned: {actual!r} vs {predicted!r}")
    a, p = actual.values, predicted.values
    zero = np.flatnonzero(a == 0)
    if len(zero):
        raise MetricError(f"actual is zero in week {actual.start + int(zero[0])}; MAPE undefined")
    return float(100.0 * np.mean(np.abs(a - p) / np.abs(a)))


@dataclass(frozen=True)
class Fold:
    index: int  # 1-based, chronological
    train: tuple[int, int]  # inclusive week range
    test: tuple[int, int]
    weight: float

    @property
    def origin(self) -> int:
        return self.test[0] - 1


@dataclass(frozen=True)
class FoldScore:
    fold_index: int
    mape: float
    weight: float


def check_weights(weights: Sequence[float], monotone: bool = True) -> np.ndarray:
    v = np.asarray(weights, dtype=float)
    if len(v) == 0 or np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValidationError("fold weights must be positive")
    if abs(v.sum() - 1.0) > WEIGHT_TOL:
        raise ValidationError(f"fold weights sum to {v.sum()!r}, not 1")
    if monotone and np.any(np.diff(v) < -WEIGHT_TOL):
        raise ValidationError("fold weights must not decrease towards recent folds")
    return v


def linear_weights(n: int) -> tuple[float, ...]:
    """1/T, 2/T, ... n/T with T = n(n+1)/2: the default most-recent-heaviest weights."""
    total = n * (n + 1) / 2
    return tuple((i + 1) / total for i in range(n))


def sliding_folds(series: WeeklySeries | tuple[int, int], n_folds: int = 3, horizon: int = 13,
                  min_train: int = 26, weights: Sequence[float] | None = None) -> list[Fold]:
    """Expanding-train folds testing the last ``n_folds`` disjoint horizon blocks.

    Fold f trains on everything before its test block. Weights default to
    1/6, 2/6, 3/6 for three folds (linear in recency in general).
    """
    lo, hi = (series.start, series.end) if isinstance(series, WeeklySeries) else series
    if n_folds < 1 or horizon < 1:
        raise ValidationError("n_folds and horizon must be >= 1")
    if hi - lo + 1 < n_folds * horizon + min_train:
        raise DataError(
            f"{hi - lo + 1} weeks is too short for {n_folds} folds of {horizon} plus {min_train} training weeks")
    v = check_weights(weights if weights is not None else linear_weights(n_folds))
    if len(v) != n_folds:
        raise ValidationError("one weight per fold required")
    folds = []
    for f in range(n_folds):
        test_lo = hi - (n_folds - f) * horizon + 1
        folds.append(Fold(f + 1, (lo, test_lo - 1), (test_lo, test_lo + horizon - 1), float(v[f])))
    return folds


def _weighted_mean_std(values: Sequence[float], weights: Sequence[float]) -> tuple[float, float]:
    e = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    wsum = w.sum()
    mean = float(np.dot(w, e) / wsum)
    var = float(np.dot(w, (e - mean) ** 2) / wsum)
    return mean, math.sqrt(max(var, 0.0))


def variance_weighted_score(folds: Sequence[FoldScore], alpha: float = 0.5) -> float:
    """alpha * weighted mean MAPE + (1 - alpha) * weighted std of fold MAPEs."""
    if not folds:
        raise ValidationError("no fold scores")
    if not 0 <= alpha <= 1:
        raise ValidationError("alpha must lie in [0, 1]")
    v = check_weights([f.weight for f in folds], monotone=False)
    mean, std = _weighted_mean_std([f.mape for f in folds], v)
    return alpha * mean + (1 - alpha) * std


def final_score(window_scores: Sequence[float]) -> float:
    if len(window_scores) == 0:
        raise ValidationError("final_score needs at least one window score")
    return float(np.mean(window_scores))


@dataclass(frozen=True)
class LossWeights:
    weights: tuple[float, ...]
    alpha: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.weights or any(not (w > 0 and math.isfinite(w)) for w in self.weights):
            raise ValidationError("loss weights must be positive")
        if not 0 <= self.alpha <= 1:
            raise ValidationError("alpha must lie in [0, 1]")


def custom_loss(errors: Sequence[float], weights: LossWeights) -> float:
    """alpha * weighted mean error + (1 - alpha) * weighted std; weights need not sum to 1."""
    if len(errors) != len(weights.weights):
        raise ValidationError(f"{len(errors)} errors but {len(weights.weights)} weights")
    mean, std = _weighted_mean_std(errors, weights.weights)
    return weights.alpha * mean + (1 - weights.alpha) * std


def accuracy_uplift(error_baseline: float, error_proposed: float) -> float:
    """Relative error reduction of the proposed model, in percent."""
    if not error_baseline > 0:
        raise ValidationError("baseline error must be > 0")
    return (error_baseline - error_proposed) / error_baseline * 100.0


def payment_deviation(invoice: Invoice) -> int:
    """Signed days from due date to payment; negative is early."""
    if invoice.payment_date is None:
        raise MissingDataError(f"invoice {invoice.invoice_id} is open")
    return (invoice.payment_date - invoice.due_date).days


def _summary(values: Sequence[float]) -> dict[str, float]:
    a = np.asarray(values, dtype=float)
    return {
        "n": int(len(a)),
        "mean": float(a.mean()),
        "mean_abs": float(np.abs(a).mean()),
        "median": float(np.median(a)),
        "p10": float(np.percentile(a, 10)),
        "p90": float(np.percentile(a, 90)),
    }


def deviation_summary(invoices: Iterable[Invoice]) -> dict[str, dict[str, float]]:
    """Payment deviation statistics per segment (closed invoices only) plus ``all``."""
    by_seg: dict[str, list[int]] = defaultdict(list)
    for inv in invoices:
        if inv.payment_date is None:
            continue
        d = payment_deviation(inv)
        by_seg[Segment(inv.segment).value].append(d)
        by_seg["all"].append(d)
    return {k: _summary(v) for k, v in sorted(by_seg.items())}


def closure_error_summary(invoices: Iterable[Invoice], predicted: Mapping[str, date]) -> dict[str, dict[str, float]]:
    """Signed days predicted close minus actual close, per segment plus ``all``."""
    by_seg: dict[str, list[int]] = defaultdict(list)
    for inv in invoices:
        if inv.payment_date is None or inv.invoice_id not in predicted:
            continue
        d = (predicted[inv.invoice_id] - inv.payment_date).days
        by_seg[Segment(inv.segment).value].append(d)
        by_seg["all"].append(d)
    return {k: _summary(v) for k, v in sorted(by_seg.items())}
