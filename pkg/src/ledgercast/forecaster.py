"""Additive weekly forecaster: piecewise-linear trend, Fourier seasonality,
external regressors and event indicators, fitted by group-ridge least squares.

Design columns, in order::

    [1, t, max(0, t - c_1) ... max(0, t - c_m),
     sin(2 pi k t / P), cos(2 pi k t / P) for each block, k = 1..K,
     standardized regressors (sorted by name),
     0/1 event indicators (sorted by name)]

``t`` is the absolute fiscal week number, so seasonal phases are fixed to
the calendar rather than to the start of the training span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Collection, Mapping, Sequence

import numpy as np

from .core import WeeklySeries
from .errors import DataError, ValidationError
from .lags import ols_fit

Events = Mapping[str, Collection[int]]


@dataclass(frozen=True)
class SeasonalBlock:
    name: str
    period: float
    order: int

    def __post_init__(self):
        if self.period <= 0:
            raise ValidationError(f"seasonality {self.name}: period must be > 0")
        if self.order < 1:
            raise ValidationError(f"seasonality {self.name}: fourier order must be >= 1")


@dataclass(frozen=True)
class SeasonalityConfig:
    blocks: tuple[SeasonalBlock, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(
            b if isinstance(b, SeasonalBlock) else SeasonalBlock(**b) for b in self.blocks))
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ValidationError("seasonality block names must be unique")
        # At weekly sampling, harmonics with equal folded frequency give
        # identical (or sign-flipped) columns; reject them up front.
        seen: dict[float, str] = {}
        for b in self.blocks:
            for k in range(1, b.order + 1):
                f = (k / b.period) % 1.0
                f = round(min(f, 1.0 - f), 12)
                label = f"{b.name} order {k}"
                if f == 0.0 or f == 0.5:
                    raise ValidationError(f"{label} is degenerate at weekly sampling")
                if f in seen:
                    raise ValidationError(f"{label} duplicates {seen[f]}")
                seen[f] = label

    @classmethod
    def standard(cls, quarterly_order: int = 3, yearly_order: int = 2) -> SeasonalityConfig:
        """Quarterly (13-week) and yearly (52-week) blocks; an order of 0 drops a block."""
        blocks = []
        if quarterly_order:
            blocks.append(SeasonalBlock("quarterly", 13.0, int(quarterly_order)))
        if yearly_order:
            blocks.append(SeasonalBlock("yearly", 52.0, int(yearly_order)))
        return cls(tuple(blocks))


@dataclass(frozen=True)
class ForecasterConfig:
    seasonality: SeasonalityConfig = field(default_factory=SeasonalityConfig.standard)
    n_changepoints: int = 8
    changepoint_range: float = 0.8
    seasonal_ridge: float = 1.0
    regressor_ridge: float = 1.0
    event_ridge: float = 1.0
    changepoint_ridge: float = 10.0

    def __post_init__(self):
        if not isinstance(self.seasonality, SeasonalityConfig):
            object.__setattr__(self, "seasonality", SeasonalityConfig(**self.seasonality))
        if self.n_changepoints < 0:
            raise ValidationError("n_changepoints must be >= 0")
        if not 0 < self.changepoint_range <= 1:
            raise ValidationError("changepoint_range must lie in (0, 1]")
        for name in ("seasonal_ridge", "regressor_ridge", "event_ridge", "changepoint_ridge"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")

    def with_ridge(self, ridge: float) -> ForecasterConfig:
        return replace(self, seasonal_ridge=ridge, regressor_ridge=ridge,
                       event_ridge=ridge, changepoint_ridge=ridge)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seasonality": [{"name": b.name, "period": b.period, "order": b.order}
                            for b in self.seasonality.blocks],
            "n_changepoints": self.n_changepoints,
            "changepoint_range": self.changepoint_range,
            "seasonal_ridge": self.seasonal_ridge,
            "regressor_ridge": self.regressor_ridge,
            "event_ridge": self.event_ridge,
            "changepoint_ridge": self.changepoint_ridge,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ForecasterConfig:
        d = dict(d)
        d["seasonality"] = SeasonalityConfig(tuple(SeasonalBlock(**b) for b in d.get("seasonality", [])))
        return cls(**d)


def place_changepoints(first_week: int, last_week: int, n: int, span: float = 0.8) -> list[int]:
    """``n`` evenly spaced weeks over the first ``span`` of the history."""
    if n == 0 or last_week <= first_week:
        return []
    reach = int(math.floor(span * (last_week - first_week)))
    idx = np.round(np.linspace(0, reach, n + 1)[1:]).astype(int)
    return sorted({int(first_week) + int(i) for i in idx if 0 < i})


@dataclass(frozen=True)
class Design:
    matrix: np.ndarray
    names: tuple[str, ...]
    groups: tuple[str, ...]  # component each column belongs to
    kinds: tuple[str, ...]  # trend | changepoint | seasonal | regressor | event


def _standardize(x: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(x))
    sd = float(np.std(x))
    return mean, (sd if sd > 0 else 1.0)


def design_matrix(weeks: Sequence[int], config: ForecasterConfig | SeasonalityConfig,
                  regressors: Mapping[str, WeeklySeries] | None = None, events: Events | None = None,
                  changepoints: Sequence[int] = (),
                  standardization: Mapping[str, tuple[float, float]] | None = None) -> Design:
    """Design matrix for ``weeks``; see the module docstring for column order.

    Regressors are standardized with ``standardization`` when given (the
    training parameters at predict time), otherwise with their own mean and
    population standard deviation over ``weeks``.
    """
    seas = config.seasonality if isinstance(config, ForecasterConfig) else config
    weeks = np.asarray(weeks, dtype=int)
    t = weeks.astype(float)
    cols, names, groups, kinds = [np.ones(len(t)), t], ["intercept", "slope"], ["trend", "trend"], ["trend", "trend"]
    for c in changepoints:
        cols.append(np.maximum(0.0, t - c))
        names.append(f"changepoint {c}")
        groups.append("trend")
        kinds.append("changepoint")
    for b in seas.blocks:
        for k in range(1, b.order + 1):
            arg = 2.0 * np.pi * k * t / b.period
            cols += [np.sin(arg), np.cos(arg)]
            names += [f"{b.name} sin{k}", f"{b.name} cos{k}"]
            groups += [b.name, b.name]
            kinds += ["seasonal", "seasonal"]
    for name in sorted(regressors or {}):
        series = regressors[name]
        missing = [int(w) for w in weeks if w not in series]
        if missing:
            raise DataError(f"regressor {name!r} lacks weeks {_ranges(missing)}")
        x = series.take(weeks)
        mean, sd = (standardization or {}).get(name) or _standardize(x)
        cols.append((x - mean) / sd)
        names.append(name)
        groups.append(name)
        kinds.append("regressor")
    for name in sorted(events or {}):
        ws = set(int(w) for w in events[name])
        cols.append(np.array([1.0 if w in ws else 0.0 for w in weeks]))
        names.append(name)
        groups.append(name)
        kinds.append("event")
    return Design(np.column_stack(cols), tuple(names), tuple(groups), tuple(kinds))


def _ranges(weeks: list[int]) -> str:
    out, start, prev = [], weeks[0], weeks[0]
    for w in weeks[1:] + [None]:
        if w is not None and w == prev + 1:
            prev = w
            continue
        out.append(str(start) if start == prev else f"{start}-{prev}")
        if w is not None:
            start = prev = w
    return ", ".join(out)


@dataclass(frozen=True)
class AdditiveModel:
    config: ForecasterConfig
    changepoints: tuple[int, ...]
    names: tuple[str, ...]
    groups: tuple[str, ...]
    kinds: tuple[str, ...]
    coefficients: np.ndarray
    standardization: Mapping[str, tuple[float, float]]
    event_names: tuple[str, ...]
    train_span: tuple[int, int]

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    @property
    def regressor_names(self) -> tuple[str, ...]:
        return tuple(n for n, k in zip(self.names, self.kinds) if k == "regressor")

    def regressor_effects(self) -> dict[str, float]:
        """Coefficient per regressor in the regressor's original units."""
        return {n: self.coef(n) / self.standardization[n][1] for n in self.regressor_names}

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "changepoints": list(self.changepoints),
            "columns": [{"name": n, "group": g, "kind": k, "coefficient": float(c)}
                        for n, g, k, c in zip(self.names, self.groups, self.kinds, self.coefficients)],
            "standardization": {k: list(v) for k, v in sorted(self.standardization.items())},
            "events": list(self.event_names),
            "train_span": list(self.train_span),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> AdditiveModel:
        cols = d["columns"]
        return cls(
            config=ForecasterConfig.from_dict(d["config"]),
            changepoints=tuple(int(c) for c in d["changepoints"]),
            names=tuple(c["name"] for c in cols),
            groups=tuple(c["group"] for c in cols),
            kinds=tuple(c["kind"] for c in cols),
            coefficients=np.array([float(c["coefficient"]) for c in cols]),
            standardization={k: (float(v[0]), float(v[1])) for k, v in d["standardization"].items()},
            event_names=tuple(d["events"]),
            train_span=(int(d["train_span"][0]), int(d["train_span"][1])),
        )


def fit(series: WeeklySeries, config: ForecasterConfig = ForecasterConfig(),
        regressors: Mapping[str, WeeklySeries] | None = None, events: Events | None = None,
        ridge: float | None = None) -> AdditiveModel:
    """Group-ridge least-squares fit over every week of ``series``.

    The problem is solved on a rescaled copy: the target is divided by its
    mean absolute value and each column by its largest absolute value, and
    penalties apply to those rescaled coefficients. That makes the ridge
    strengths unit-free. Intercept and base slope are never penalized.
    Columns that are identically zero over the training span (an event that
    never happens, a constant regressor) are left out and get coefficient 0.
    ``ridge``, if given, overrides every group strength.
    """
    if len(series) == 0:
        raise DataError("cannot fit an empty series")
    if ridge is not None:
        config = config.with_ridge(ridge)
    weeks = series.weeks
    cps = place_changepoints(int(weeks[0]), int(weeks[-1]), config.n_changepoints, config.changepoint_range)
    regressors = dict(regressors or {})
    std = {}
    for name, s in regressors.items():
        missing = [int(w) for w in weeks if w not in s]
        if missing:
            raise DataError(f"regressor {name!r} lacks weeks {_ranges(missing)}")
        std[name] = _standardize(s.take(weeks))
    des = design_matrix(weeks, config, regressors, events, cps, std)
    D, y = des.matrix, series.values
    col_scale = np.max(np.abs(D), axis=0)
    live = col_scale > 0
    y_scale = float(np.mean(np.abs(y))) or 1.0
    strength = {"trend": 0.0, "changepoint": config.changepoint_ridge, "seasonal": config.seasonal_ridge,
                "regressor": config.regressor_ridge, "event": config.event_ridge}
    pen = np.array([strength[k] for k in des.kinds])
    Ds = D[:, live] / col_scale[live]
    names = [n for n, ok in zip(des.names, live) if ok]
    beta_s = ols_fit(Ds, y / y_scale, pen[live], names)
    beta = np.zeros(D.shape[1])
    beta[live] = beta_s * y_scale / col_scale[live]
    return AdditiveModel(
        config=config, changepoints=tuple(cps), names=des.names, groups=des.groups, kinds=des.kinds,
        coefficients=beta, standardization=std, event_names=tuple(sorted(events or {})),
        train_span=(int(weeks[0]), int(weeks[-1])),
    )


def _model_design(model: AdditiveModel, weeks, regressors, events) -> Design:
    regressors = dict(regressors or {})
    missing = [n for n in model.regressor_names if n not in regressors]
    if missing:
        raise DataError(f"missing regressors {missing}")
    regressors = {n: regressors[n] for n in model.regressor_names}
    events = {n: (events or {}).get(n, ()) for n in model.event_names}
    return design_matrix(weeks, model.config, regressors, events, model.changepoints, model.standardization)


def predict(model: AdditiveModel, weeks: Sequence[int], regressors: Mapping[str, WeeklySeries] | None = None,
            events: Events | None = None) -> WeeklySeries:
    """Evaluate the fitted equation on consecutive ``weeks``."""
    weeks = np.asarray(weeks, dtype=int)
    if len(weeks) == 0:
        return WeeklySeries.empty()
    if np.any(np.diff(weeks) != 1):
        raise ValidationError("forecast weeks must be consecutive")
    des = _model_design(model, weeks, regressors, events)
    return WeeklySeries(int(weeks[0]), des.matrix @ model.coefficients)


@dataclass(frozen=True)
class Decomposition:
    components: dict[str, WeeklySeries]
    prediction: WeeklySeries
    shares: dict[str, float]


def decompose(model: AdditiveModel, weeks: Sequence[int], regressors: Mapping[str, WeeklySeries] | None = None,
              events: Events | None = None) -> Decomposition:
    """Per-component weekly contributions and their shares of mean |contribution|."""
    weeks = np.asarray(weeks, dtype=int)
    des = _model_design(model, weeks, regressors, events)
    contrib = des.matrix * model.coefficients
    order = list(dict.fromkeys(des.groups))
    start = int(weeks[0])
    comps = {}
    for g in order:
        idx = [i for i, gi in enumerate(des.groups) if gi == g]
        comps[g] = WeeklySeries(start, contrib[:, idx].sum(axis=1))
    mags = {g: float(np.mean(np.abs(c.values))) for g, c in comps.items()}
    total = sum(mags.values())
    shares = {g: (m / total if total > 0 else 0.0) for g, m in mags.items()}
    return Decomposition(comps, WeeklySeries(start, des.matrix @ model.coefficients), shares)
