"""Pipeline configuration: nested frozen dataclasses loaded from YAML or JSON.

Precedence is CLI flag > file value > default. Unknown keys are rejected so
typos fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields, replace
from datetime import date
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..closure import GbtParams
from ..core import FiscalCalendar
from ..errors import ConfigError, ValidationError
from ..forecaster import ForecasterConfig, SeasonalityConfig
from ..metrics import check_weights, linear_weights

VARIANTS = ("h1", "h2")


@dataclass(frozen=True)
class CalendarSection:
    fiscal_year_start: date = date(2019, 2, 4)
    n_years: int = 50

    def build(self) -> FiscalCalendar:
        return FiscalCalendar(self.fiscal_year_start, self.n_years)


@dataclass(frozen=True)
class DataSection:
    invoices: str | None = None
    support: str | None = None
    support_series: tuple[str, ...] | None = None  # None: every series in the file


@dataclass(frozen=True)
class ClosureSection:
    n_trees: int = 40
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 20

    def params(self) -> GbtParams:
        return GbtParams(self.n_trees, self.max_depth, self.learning_rate, self.min_samples_leaf)


@dataclass(frozen=True)
class WindowSection:
    enabled: bool = True
    short_len: int = 4
    long_len: int = 13


@dataclass(frozen=True)
class LagSection:
    enabled: bool = True
    max_lag: int = 13
    threshold: float = 0.05
    ridge: float = 0.0
    gamma: float = 0.0
    # A fixed spec per support series ({"orders": LagSpec.to_dict()}) skips selection.
    fixed: Mapping[str, Any] | None = None


@dataclass(frozen=True)
class ForecastSection:
    quarterly_order: int = 3
    yearly_order: int = 2
    n_changepoints: int = 8
    changepoint_range: float = 0.8
    seasonal_ridge: float = 1.0
    regressor_ridge: float = 1.0
    event_ridge: float = 1.0
    changepoint_ridge: float = 10.0

    def build(self) -> ForecasterConfig:
        return ForecasterConfig(
            SeasonalityConfig.standard(self.quarterly_order, self.yearly_order),
            self.n_changepoints, self.changepoint_range, self.seasonal_ridge,
            self.regressor_ridge, self.event_ridge, self.changepoint_ridge,
        )


@dataclass(frozen=True)
class EventSection:
    name: str
    weeks_in_year: tuple[int, ...] = ()
    weeks: tuple[int, ...] = ()


@dataclass(frozen=True)
class EvalSection:
    horizon: int = 13
    n_folds: int = 3
    n_windows: int = 3
    window_step: int = 13
    min_train: int = 52
    fold_weights: tuple[float, ...] | None = None
    alpha: float = 0.5

    def weights(self) -> tuple[float, ...]:
        return self.fold_weights if self.fold_weights is not None else linear_weights(self.n_folds)


@dataclass(frozen=True)
class BaselineSection:
    method: str = "holt_winters_additive"
    pure: bool = False


@dataclass(frozen=True)
class TuneSection:
    budget: int = 20
    method: str = "gp"  # gp | random


@dataclass(frozen=True)
class PipelineConfig:
    variant: str = "h2"
    seed: int = 0
    calendar: CalendarSection = CalendarSection()
    data: DataSection = DataSection()
    closure: ClosureSection = ClosureSection()
    windows: WindowSection = WindowSection()
    lags: LagSection = LagSection()
    forecast: ForecastSection = ForecastSection()
    events: tuple[EventSection, ...] = ()
    eval: EvalSection = EvalSection()
    baseline: BaselineSection = BaselineSection()
    tune: TuneSection = TuneSection()

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        w = self.windows
        if w.short_len < 0 or w.long_len < 0:
            raise ConfigError("window lengths must be >= 0")
        lg = self.lags
        if lg.max_lag < 0 or lg.ridge < 0 or lg.gamma < 0:
            raise ConfigError("lag max_lag, ridge and gamma must be >= 0")
        ev = self.eval
        if ev.horizon < 1 or ev.n_folds < 1 or ev.n_windows < 1 or ev.window_step < 1:
            raise ConfigError("eval horizon, n_folds, n_windows and window_step must be >= 1")
        if not 0 <= ev.alpha <= 1:
            raise ConfigError("eval alpha must lie in [0, 1]")
        try:
            weights = check_weights(ev.weights())
        except ValidationError as exc:
            raise ConfigError(f"eval fold_weights: {exc}") from exc
        if len(weights) != ev.n_folds:
            raise ConfigError("eval fold_weights needs one weight per fold")
        if self.baseline.method not in ("holt_winters_additive", "seasonal_naive"):
            raise ConfigError(f"unknown baseline method {self.baseline.method!r}")
        if self.tune.budget < 1:
            raise ConfigError("tune budget must be >= 1")
        if self.tune.method not in ("gp", "random"):
            raise ConfigError(f"unknown tune method {self.tune.method!r}")
        names = [e.name for e in self.events]
        if len(set(names)) != len(names):
            raise ConfigError("event names must be unique")
        try:
            self.closure.params()
            self.forecast.build()
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, **flat: Any) -> PipelineConfig:
        """Replace values addressed as ``section__field`` (or top-level names)."""
        data = to_dict(self)
        for key, value in flat.items():
            parts = key.split("__")
            node = data
            for p in parts[:-1]:
                if p not in node or not isinstance(node[p], dict):
                    raise ConfigError(f"unknown config section {p!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return from_dict(data)


_SECTIONS = {
    "calendar": CalendarSection, "data": DataSection, "closure": ClosureSection,
    "windows": WindowSection, "lags": LagSection, "forecast": ForecastSection,
    "eval": EvalSection, "baseline": BaselineSection, "tune": TuneSection,
}


def _coerce(cls, raw: Mapping[str, Any], where: str):
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in raw.items():
        default = known[name].default
        if isinstance(default, date) and isinstance(value, str):
            try:
                value = date.fromisoformat(value)
            except ValueError as exc:
                raise ConfigError(f"{where}.{name}: {exc}") from exc
        elif isinstance(value, list):
            value = tuple(value)
        elif isinstance(default, bool) and not isinstance(value, bool):
            raise ConfigError(f"{where}.{name} must be true or false")
        elif isinstance(default, int) and not isinstance(default, bool) and isinstance(value, float):
            if not value.is_integer():
                raise ConfigError(f"{where}.{name} must be an integer")
            value = int(value)
        elif isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def from_dict(data: Mapping[str, Any]) -> PipelineConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - {f.name for f in fields(PipelineConfig)})
    if unknown:
        raise ConfigError(f"unknown top-level config key(s): {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _coerce(_SECTIONS[key], value or {}, key)
        elif key == "events":
            kwargs[key] = tuple(_coerce(EventSection, e, f"events[{i}]") for i, e in enumerate(value or []))
        else:
            kwargs[key] = value
    return PipelineConfig(**kwargs)


def _plain(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, date):
        return value.isoformat()
    return value


def to_dict(config: PipelineConfig) -> dict[str, Any]:
    return _plain(config)


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    cfg = from_dict(data or {})
    # relative data paths resolve against the config file's directory
    def resolve(p: str | None) -> str | None:
        return p if p is None or Path(p).is_absolute() else str(path.parent / p)

    return replace(cfg, data=replace(cfg.data, invoices=resolve(cfg.data.invoices),
                                     support=resolve(cfg.data.support)))


def event_weeks(config: PipelineConfig, cal: FiscalCalendar) -> dict[str, frozenset[int]]:
    """Expand event definitions into absolute week sets over the calendar."""
    out = {}
    for ev in config.events:
        weeks = set(int(w) for w in ev.weeks)
        for wiy in ev.weeks_in_year:
            if not 1 <= wiy <= cal.weeks_per_year:
                raise ConfigError(f"event {ev.name}: week_in_year {wiy} outside 1..{cal.weeks_per_year}")
            weeks.update(range(wiy, cal.last_week + 1, cal.weeks_per_year))
        out[ev.name] = frozenset(weeks)
    return out
