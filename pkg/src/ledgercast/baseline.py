"""Univariate baselines and the H1 baseline forecast.

H1 uses no lagged support and no rolling-window regressors. In its default
form it fits the additive forecaster to realized collections with each raw
support series as a same-week regressor; the support values for the horizon
come from a Holt-Winters forecast of the support series itself. The ``pure``
form just runs Holt-Winters on collections.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import WeeklySeries
from .errors import DataError, ValidationError
from . import forecaster as fc

SEASON_LENGTH = 13
METHODS = ("seasonal_naive", "holt_winters_additive")
DEFAULT_GRID = (0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class UnivariateModel:
    """Fitted univariate state at ``end_week``.

    ``seasonal[i]`` is the seasonal term of week ``end_week - m + 1 + i``,
    so the forecast h weeks ahead uses ``seasonal[(h - 1) % m]``.
    """

    method: str
    season_length: int
    end_week: int
    level: float
    trend: float
    seasonal: np.ndarray
    params: Mapping[str, float] = field(default_factory=dict)
    sse: float = 0.0

    def forecast(self, horizon: int) -> WeeklySeries:
        if horizon < 1:
            raise ValidationError("horizon must be >= 1")
        h = np.arange(1, horizon + 1)
        s = self.seasonal[(h - 1) % self.season_length]
        return WeeklySeries(self.end_week + 1, self.level + h * self.trend + s)


def _hw_init(y: np.ndarray, m: int) -> tuple[float, float, np.ndarray]:
    # State at the end of the first season, from the first two season means.
    mean1, mean2 = y[:m].mean(), y[m:2 * m].mean()
    b0 = (mean2 - mean1) / m
    centre = (m - 1) / 2.0
    seasonal = y[:m] - (mean1 + (np.arange(m) - centre) * b0)
    return mean1 + centre * b0, b0, seasonal


def _hw_run(y: np.ndarray, m: int, alpha: np.ndarray, beta: np.ndarray, gamma: np.ndarray):
    """Additive Holt-Winters for a batch of parameter triples at once."""
    level0, trend0, seas0 = _hw_init(y, m)
    k = len(alpha)
    level = np.full(k, level0)
    trend = np.full(k, trend0)
    seas = np.tile(seas0, (k, 1))  # ring buffer indexed by t % m
    sse = np.zeros(k)
    for t in range(m, len(y)):
        j = t % m
        s_old = seas[:, j]
        err = y[t] - (level + trend + s_old)
        sse += err * err
        new_level = alpha * (y[t] - s_old) + (1 - alpha) * (level + trend)
        trend = beta * (new_level - level) + (1 - beta) * trend
        seas[:, j] = gamma * (y[t] - new_level) + (1 - gamma) * s_old
        level = new_level
    return level, trend, seas, sse


def fit_univariate(series: WeeklySeries, method: str = "holt_winters_additive",
                   params: Mapping[str, float] | None = None, season_length: int = SEASON_LENGTH,
                   grid: Sequence[float] = DEFAULT_GRID) -> UnivariateModel:
    """Fit ``seasonal_naive`` or ``holt_winters_additive``.

    Holt-Winters smoothing constants not fixed in ``params`` are chosen by
    exhaustive search over ``grid`` minimizing in-sample one-step SSE; ties
    go to the first triple in (alpha, beta, gamma) grid order.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown univariate method {method!r}; expected one of {METHODS}")
    m = season_length
    y = series.values
    if len(y) < 2 * m:
        raise DataError(f"{method} needs at least {2 * m} weeks, got {len(y)}")
    if not np.all(np.isfinite(y)):
        raise DataError("series contains non-finite values")
    if method == "seasonal_naive":
        return UnivariateModel(method, m, series.end, 0.0, 0.0, y[-m:].copy())
    params = dict(params or {})
    axes = [[params[n]] if n in params else list(grid) for n in ("alpha", "beta", "gamma")]
    for n in ("alpha", "beta", "gamma"):
        if n in params and not 0 <= params[n] <= 1:
            raise ValidationError(f"{n} must lie in [0, 1]")
    triples = np.array(list(itertools.product(*axes)), dtype=float)
    level, trend, seas, sse = _hw_run(y, m, triples[:, 0], triples[:, 1], triples[:, 2])
    best = int(np.argmin(sse))
    # rotate the ring buffer so index 0 is the season slot of week end - m + 1
    n = len(y)
    order = (np.arange(n - m, n)) % m
    return UnivariateModel(
        method, m, series.end, float(level[best]), float(trend[best]), seas[best, order].copy(),
        params=dict(zip(("alpha", "beta", "gamma"), map(float, triples[best]))), sse=float(sse[best]),
    )


def forecast_support(support: Mapping[str, WeeklySeries], origin: int, horizon: int,
                     method: str = "holt_winters_additive") -> dict[str, WeeklySeries]:
    """Each support series observed through ``origin`` extended ``horizon`` weeks ahead."""
    out = {}
    for name, s in support.items():
        hist = s.slice(None, origin)
        if len(hist) == 0 or hist.end != origin:
            raise DataError(f"support series {name!r} does not reach week {origin}")
        out[name] = hist.concat(fit_univariate(hist, method).forecast(horizon))
    return out


@dataclass
class H1Result:
    forecast: WeeklySeries
    model: fc.AdditiveModel | UnivariateModel
    used_regressors: tuple[str, ...]
    support_forecast: dict[str, WeeklySeries]
    # flags proving what H1 looked at; the tests assert they stay False
    used_lagged_support: bool = False
    used_windowed_regressors: bool = False


def h1_forecast(target: WeeklySeries, support: Mapping[str, WeeklySeries], horizon: int = 13,
                config: fc.ForecasterConfig = fc.ForecasterConfig(), events: fc.Events | None = None,
                pure: bool = False, method: str = "holt_winters_additive") -> H1Result:
    """Quarter-ahead H1 forecast from realized collections ``target``.

    ``target`` must end at the forecast origin. Support series enter
    unlagged; their horizon values are forecast independently.
    """
    origin = target.end
    if pure:
        model = fit_univariate(target, method)
        return H1Result(model.forecast(horizon), model, (), {})
    future = forecast_support(support, origin, horizon, method)
    model = fc.fit(target, config, future, events)
    weeks = np.arange(origin + 1, origin + horizon + 1)
    return H1Result(fc.predict(model, weeks, future, events), model, tuple(sorted(future)), future)
