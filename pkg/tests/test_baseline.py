from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ledgercast.baseline import fit_univariate, forecast_support, h1_forecast
from ledgercast.core import WeeklySeries
from ledgercast.errors import DataError, ValidationError
from ledgercast.forecaster import AdditiveModel


def periodic(n=52, start=1, seed=0):
    pattern = np.random.default_rng(seed).uniform(50, 150, 13)
    return WeeklySeries(start, np.tile(pattern, n // 13 + 1)[:n])


def scalar_holt_winters(y, m, a, b, g, h):
    """Textbook additive Holt-Winters written out step by step, as an oracle."""
    mean1, mean2 = np.mean(y[:m]), np.mean(y[m:2 * m])
    trend = (mean2 - mean1) / m
    c = (m - 1) / 2
    season = [y[i] - (mean1 + (i - c) * trend) for i in range(m)]
    level = mean1 + c * trend
    for t in range(m, len(y)):
        s = season[t - m]
        new_level = a * (y[t] - s) + (1 - a) * (level + trend)
        trend = b * (new_level - level) + (1 - b) * trend
        season.append(g * (y[t] - new_level) + (1 - g) * s)
        level = new_level
    n = len(y)
    return [level + k * trend + season[n - m + (k - 1) % m] for k in range(1, h + 1)]


class TestUnivariate:
    def test_seasonal_naive_repeats_period(self):
        s = periodic(52)
        f = fit_univariate(s, "seasonal_naive").forecast(26)
        np.testing.assert_array_equal(f.values, np.tile(s.values[-13:], 2))
        assert f.start == 53

    @given(st.integers(0, 2 ** 32 - 1), st.integers(26, 80), st.integers(1, 13))
    @settings(max_examples=20)
    def test_seasonal_naive_lags_13(self, seed, n, h):
        s = WeeklySeries(5, np.random.default_rng(seed).normal(size=n))
        f = fit_univariate(s, "seasonal_naive").forecast(h)
        for w, v in f.entries:
            assert v == s[w - 13]

    def test_constant_holt_winters(self):
        f = fit_univariate(WeeklySeries(1, np.full(60, 42.0))).forecast(13)
        np.testing.assert_allclose(f.values, 42.0, atol=1e-6)

    def test_linear_series(self):
        t = np.arange(1, 105, dtype=float)
        f = fit_univariate(WeeklySeries(1, t)).forecast(13)
        truth = np.arange(105, 118)
        assert np.all(np.abs(f.values - truth) / truth < 0.05)

    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.1, 0.5, 0.9]), st.sampled_from([0.05, 0.3]),
           st.sampled_from([0.02, 0.7]))
    @settings(max_examples=25, deadline=None)
    def test_matches_scalar_oracle(self, seed, a, b, g):
        rng = np.random.default_rng(seed)
        y = 100 + np.arange(70) * 0.5 + 10 * np.sin(np.arange(70) * 2 * np.pi / 13) + rng.normal(size=70)
        m = fit_univariate(WeeklySeries(1, y), params={"alpha": a, "beta": b, "gamma": g})
        np.testing.assert_allclose(m.forecast(20).values, scalar_holt_winters(y, 13, a, b, g, 20), rtol=1e-10)

    def test_grid_search_picks_min_sse(self):
        y = WeeklySeries(1, periodic(70).values + np.random.default_rng(1).normal(size=70))
        best = fit_univariate(y)
        for a in (0.1, 0.9):
            other = fit_univariate(y, params={"alpha": a, "beta": 0.05, "gamma": 0.3})
            assert best.sse <= other.sse + 1e-9

    def test_errors(self):
        with pytest.raises(DataError):
            fit_univariate(WeeklySeries(1, np.ones(25)))
        with pytest.raises(ValidationError):
            fit_univariate(periodic(), "arima")
        with pytest.raises(ValidationError):
            fit_univariate(periodic(), params={"alpha": 1.5})
        with pytest.raises(ValidationError):
            fit_univariate(periodic()).forecast(0)


class TestH1:
    def _data(self):
        rng = np.random.default_rng(2)
        support = WeeklySeries(1, 100 + 10 * rng.normal(size=130))
        target = WeeklySeries(1, 3 * support.values[:117] + rng.normal(size=117))
        return target, {"orders": support}

    def test_horizon_length_and_flags(self):
        target, support = self._data()
        res = h1_forecast(target, support, 13)
        assert len(res.forecast) == 13 and res.forecast.start == 118
        assert not res.used_lagged_support and not res.used_windowed_regressors
        assert isinstance(res.model, AdditiveModel)
        assert res.model.regressor_names == ("orders",)

    def test_support_forecast_independent_of_future(self):
        target, support = self._data()
        res = h1_forecast(target, support, 13)
        cut = {"orders": support["orders"].slice(None, 117)}
        assert res.support_forecast == forecast_support(cut, 117, 13)

    def test_deterministic(self):
        target, support = self._data()
        a, b = h1_forecast(target, support), h1_forecast(target, support)
        assert a.forecast == b.forecast

    def test_pure_mode(self):
        target, _ = self._data()
        res = h1_forecast(target, {}, 13, pure=True)
        assert len(res.forecast) == 13 and res.used_regressors == ()

    def test_support_must_reach_origin(self):
        target, support = self._data()
        with pytest.raises(DataError):
            forecast_support({"orders": support["orders"].slice(None, 100)}, 117, 13)
