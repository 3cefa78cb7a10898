"""Single-origin forecasts for the H1 and H2 pipelines.

Both pipelines see only ``dataset.as_of(origin)``; nothing dated after the
origin is reachable from inside a run.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date
from typing import Any, Mapping

import numpy as np

from ..baseline import H1Result, UnivariateModel, forecast_support, h1_forecast
from ..closure import ClosureModel, ClosurePredictor, fit_from_invoices
from ..core import FiscalCalendar, WeeklySeries
from ..dataset import Dataset
from ..errors import DataError, LedgercastError, ValidationError
from ..forecaster import AdditiveModel, fit as fit_forecaster, predict
from ..lags import LagSpec, apply_lags, select_lags
from ..profiles import ProfileBook
from ..windows import blocked_history, open_at
from .audit import LeakageAudit
from .config import PipelineConfig, event_weeks

SHORT = "window_short"
LONG = "window_long"


@contextmanager
def stage(name: str):
    """Prefix errors escaping a stage with its name (once)."""
    try:
        yield
    except LedgercastError as exc:
        if getattr(exc, "stage", None) is None:
            exc.stage = name
            msg = exc.args[0] if exc.args else ""
            exc.args = (f"[{name}] {msg}",) + tuple(exc.args[1:])
        raise


@dataclass
class RunCache:
    """Memo of per-origin closure fits and window series for one dataset.

    Tuning re-runs the same origins with different forecaster settings;
    closure fits and window simulations depend only on the closure and
    window parameters, so they are reused.
    """

    dataset_id: int | None = None
    closure: dict[tuple, tuple[ClosureModel, ClosurePredictor]] = field(default_factory=dict)
    windows: dict[tuple, WeeklySeries] = field(default_factory=dict)
    lags: dict[tuple, LagSpec] = field(default_factory=dict)
    support: dict[tuple, dict[str, WeeklySeries]] = field(default_factory=dict)

    def bind(self, dataset: Dataset) -> None:
        if self.dataset_id is None:
            self.dataset_id = id(dataset)
        elif self.dataset_id != id(dataset):
            raise ValidationError("a RunCache belongs to a single dataset")


@dataclass
class OriginForecast:
    variant: str
    origin: int
    forecast: WeeklySeries
    model: AdditiveModel | UnivariateModel
    target: WeeklySeries
    regressors: dict[str, WeeklySeries] = field(default_factory=dict)
    lag_specs: dict[str, LagSpec] = field(default_factory=dict)
    closure: ClosureModel | None = None
    predicted_close: dict[str, date] = field(default_factory=dict)
    used_lagged_support: bool = False
    used_windowed_regressors: bool = False


def support_series(dataset: Dataset, config: PipelineConfig) -> dict[str, WeeklySeries]:
    names = config.data.support_series
    if names is None:
        return dict(dataset.support)
    missing = [n for n in names if n not in dataset.support]
    if missing:
        raise DataError(f"support series {missing} not in data (have {sorted(dataset.support)})")
    return {n: dataset.support[n] for n in names}


def target_series(view: Dataset, origin: int) -> WeeklySeries:
    """Realized weekly collections from the first payment week through ``origin``."""
    first = view.first_week
    if origin < first:
        raise DataError(f"origin {origin} precedes the first payment week {first}")
    return view.collections().window(first, origin)


def _events(config: PipelineConfig, cal: FiscalCalendar):
    return event_weeks(config, cal) or None


def forecast_h1(dataset: Dataset, origin: int, config: PipelineConfig,
                audit: LeakageAudit | None = None, cache: RunCache | None = None) -> OriginForecast:
    cal = dataset.calendar
    horizon = config.eval.horizon
    with stage("ingest"):
        view = dataset.as_of(origin)
        target = target_series(view, origin)
        support = {} if config.baseline.pure else support_series(view, config)
        if not config.baseline.pure and not support:
            raise DataError("at least one support series required")
    if audit:
        audit.record(origin, "h1:target", invoices=view.invoices, series=[target])
        audit.record(origin, "h1:support", series=support.values())
    with stage("baseline"):
        if support:
            lo = max([target.start] + [s.start for s in support.values()])
            target = target.slice(lo, origin)
        res: H1Result = h1_forecast(target, support, horizon, config.forecast.build(),
                                    _events(config, cal), config.baseline.pure, config.baseline.method)
    return OriginForecast("h1", origin, res.forecast, res.model, target, res.support_forecast,
                          used_lagged_support=res.used_lagged_support,
                          used_windowed_regressors=res.used_windowed_regressors)


def forecast_h2(dataset: Dataset, origin: int, config: PipelineConfig,
                audit: LeakageAudit | None = None, cache: RunCache | None = None) -> OriginForecast:
    """Closure fit, window simulation, lag selection, additive fit, forecast."""
    cal = dataset.calendar
    horizon = config.eval.horizon
    if cache is not None:
        cache.bind(dataset)
    with stage("ingest"):
        view = dataset.as_of(origin)
        target = target_series(view, origin)
        support = support_series(view, config)
        if not support:
            raise DataError("at least one support series required")
    if audit:
        audit.record(origin, "h2:target", invoices=view.invoices, series=[target])

    regressors: dict[str, WeeklySeries] = {}
    closure = None
    predicted: dict[str, date] = {}
    w = config.windows
    if w.enabled:
        ckey = (origin, config.closure)
        with stage("closure"):
            if cache is not None and ckey in cache.closure:
                closure, predictor = cache.closure[ckey]
            else:
                book = ProfileBook(view.invoices)
                closure = fit_from_invoices(view.invoices, book, cal, config.closure.params())
                predictor = ClosurePredictor(closure, book, cal)
                if cache is not None:
                    cache.closure[ckey] = (closure, predictor)
            if audit:
                audit.record(origin, "h2:closure", invoices=view.invoices)
        with stage("windows"):
            for name, length in ((SHORT, w.short_len), (LONG, w.long_len)):
                wkey = (origin, config.closure, length, horizon)
                if cache is not None and wkey in cache.windows:
                    regressors[name] = cache.windows[wkey]
                else:
                    regressors[name] = blocked_history(view.invoices, predictor, cal, origin, length,
                                                       horizon, target.start)
                    if cache is not None:
                        cache.windows[wkey] = regressors[name]
            cutoff = cal.last_date_of(origin)
            predicted = predictor.close_dates(open_at(view.invoices, cutoff))
            if audit:
                audit.record(origin, "h2:windows", invoices=view.invoices)

    with stage("support_forecast"):
        skey = (origin, horizon, config.baseline.method, tuple(sorted(support)))
        if cache is not None and skey in cache.support:
            future = cache.support[skey]
        else:
            future = forecast_support(support, origin, horizon, config.baseline.method)
            if cache is not None:
                cache.support[skey] = future
        if audit:
            audit.record(origin, "h2:support_forecast", series=support.values())

    specs: dict[str, LagSpec] = {}
    lg = config.lags
    with stage("lags"):
        for name, s in sorted(future.items()):
            if not lg.enabled:
                regressors[name] = s
                continue
            if lg.fixed and name in lg.fixed:
                spec = LagSpec.from_dict(lg.fixed[name])
            else:
                lkey = (origin, name, lg.max_lag, lg.threshold, lg.ridge, lg.gamma)
                if cache is not None and lkey in cache.lags:
                    spec = cache.lags[lkey]
                else:
                    spec = select_lags(support[name], target, cal, lg.max_lag, lg.threshold, lg.ridge, lg.gamma)
                    if cache is not None:
                        cache.lags[lkey] = spec
            specs[name] = spec
            regressors[f"{name}_lagged"] = apply_lags(s, spec, cal)
        if audit:
            audit.record(origin, "h2:lags", series=[target, *support.values()])

    with stage("forecaster"):
        lo = max([target.start] + [r.start for r in regressors.values()])
        train = target.slice(lo, origin)
        events = _events(config, cal)
        model = fit_forecaster(train, config.forecast.build(), regressors, events)
        weeks = np.arange(origin + 1, origin + horizon + 1)
        fc = predict(model, weeks, regressors, events)
        if audit:
            audit.record(origin, "h2:forecaster", series=[train])
    return OriginForecast(
        "h2", origin, fc, model, train, regressors, specs, closure, predicted,
        used_lagged_support=bool(specs), used_windowed_regressors=w.enabled,
    )


def forecast_at(dataset: Dataset, origin: int, config: PipelineConfig, variant: str | None = None,
                audit: LeakageAudit | None = None, cache: RunCache | None = None) -> OriginForecast:
    variant = variant or config.variant
    if variant == "h1":
        return forecast_h1(dataset, origin, config, audit, cache)
    if variant == "h2":
        return forecast_h2(dataset, origin, config, audit, cache)
    raise ValidationError(f"unknown variant {variant!r}")
