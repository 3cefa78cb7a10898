from __future__ import annotations

import dataclasses
import json
from datetime import timedelta

import numpy as np
import pytest

from ledgercast.core import WeeklySeries
from ledgercast.dataset import Dataset
from ledgercast.errors import ConfigError, DataError, ValidationError
from ledgercast.lags import LagSpec, LagTerm
from ledgercast.metrics import mape
from ledgercast.pipeline import (LeakageAudit, PipelineConfig, RunCache, compare, dumps, evaluate,
                                 evaluation_origins, forecast_at, from_dict, ingest, ingest_config,
                                 load_config, run_compare, run_h2, run_pipeline, to_dict)
from ledgercast.pipeline.report import render_markdown
from ledgercast.presets import acceptance_pipeline, acceptance_synth
from ledgercast.synthgen import generate

FAST = {"eval": {"n_windows": 1}, "closure": {"n_trees": 10}}
TRUE_SPEC = LagSpec({"non_q4": (LagTerm(3, 2.0),), "q4": (LagTerm(2, 2.5),)})


@pytest.fixture(scope="module")
def fast_config():
    return acceptance_pipeline(**FAST)


class TestConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert cfg.variant == "h2" and cfg.eval.horizon == 13 and cfg.eval.weights() == pytest.approx((1 / 6, 2 / 6, 3 / 6))
        assert cfg.windows.short_len == 4 and cfg.windows.long_len == 13

    def test_dict_round_trip(self, fast_config):
        assert from_dict(json.loads(json.dumps(to_dict(fast_config)))) == fast_config

    @pytest.mark.parametrize("data", [
        {"bogus": 1},
        {"lags": {"max_lagg": 3}},
        {"variant": "h3"},
        {"eval": {"alpha": 1.5}},
        {"eval": {"fold_weights": [0.5, 0.5]}},
        {"eval": {"fold_weights": [0.6, 0.3, 0.1]}},
        {"windows": {"enabled": "yes"}},
        {"baseline": {"method": "arima"}},
        {"events": [{"name": "a"}, {"name": "a"}]},
        {"seed": -1},
    ])
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            from_dict(data)

    def test_overrides(self):
        cfg = PipelineConfig().with_overrides(lags__max_lag=5, variant="h1")
        assert cfg.lags.max_lag == 5 and cfg.variant == "h1"
        with pytest.raises(ConfigError):
            PipelineConfig().with_overrides(lags__nope=1)

    def test_load_yaml_resolves_paths(self, tmp_path):
        (tmp_path / "c.yaml").write_text("variant: h1\ndata:\n  invoices: inv.csv\n  support: sup.csv\n")
        cfg = load_config(tmp_path / "c.yaml")
        assert cfg.variant == "h1" and cfg.data.invoices == str(tmp_path / "inv.csv")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.yaml")
        (tmp_path / "bad.yaml").write_text("variant: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "bad.yaml")


class TestIngest:
    def test_round_trip(self, small_dataset, tmp_path):
        inv, sup = small_dataset.export(tmp_path)
        ds = ingest(inv, sup, small_dataset.calendar)
        assert ds.invoices == small_dataset.invoices
        assert ds.support == small_dataset.support

    def test_bad_row_reports_line(self, small_dataset, tmp_path):
        inv, sup = small_dataset.export(tmp_path)
        lines = inv.read_text().splitlines()
        fields = lines[3].split(",")
        fields[4] = "2000-01-01"  # due before issue
        lines[3] = ",".join(fields)
        inv.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match="line 4"):
            ingest(inv, sup, small_dataset.calendar)

    def test_empty_support(self, small_dataset, tmp_path):
        inv, sup = small_dataset.export(tmp_path)
        sup.write_text("date,series_name,value\n")
        with pytest.raises(DataError, match="at least one support series required"):
            ingest(inv, sup, small_dataset.calendar)
        ds = ingest(inv, sup, small_dataset.calendar, require_support=False)
        assert ds.support == {}
        cfg = from_dict({"variant": "h1", "baseline": {"pure": True}, "data": {"invoices": str(inv)}})
        assert ingest_config(cfg).support == {}
        fc = forecast_at(ds, ds.last_week - 13, cfg, "h1")
        assert len(fc.forecast) == 13
        with pytest.raises(DataError, match="at least one support series required"):
            forecast_at(ds, ds.last_week - 13, cfg.with_overrides(variant="h2"))

    def test_missing_paths(self):
        with pytest.raises(ConfigError):
            ingest_config(PipelineConfig())
        with pytest.raises(ConfigError):
            ingest_config(from_dict({"data": {"invoices": "/nonexistent/i.csv", "support": "/nonexistent/s.csv"}}))


class TestRun:
    def test_run_h2_rejects_h1(self, small_dataset):
        with pytest.raises(ValidationError):
            run_h2(small_dataset, PipelineConfig(variant="h1"))

    def test_report_deterministic(self, small_dataset, fast_config):
        _, a = run_h2(small_dataset, fast_config)
        fc, b = run_h2(small_dataset, fast_config)
        assert dumps(a) == dumps(b)
        assert len(fc) == 13 and fc.start == small_dataset.last_week + 1
        for key in ("final_score", "config", "model"):
            assert key in json.dumps(a)
        assert render_markdown(a).startswith("#")

    def test_h1_flags(self, small_dataset, fast_config):
        fc = forecast_at(small_dataset, small_dataset.last_week - 13, fast_config, "h1")
        assert not fc.used_lagged_support and not fc.used_windowed_regressors
        fc2 = forecast_at(small_dataset, small_dataset.last_week - 13, fast_config, "h2")
        assert fc2.used_lagged_support and fc2.used_windowed_regressors
        assert {"orders_lagged", "window_short", "window_long"} <= set(fc2.regressors)

    def test_noise_free_true_params(self):
        ds = generate(acceptance_synth(3, noise_std=0.0, support={"noise_std": 0.0}))
        cfg = acceptance_pipeline(
            lags={"fixed": {"orders": TRUE_SPEC.to_dict()}},
            forecast={"seasonal_ridge": 1e-6, "regressor_ridge": 1e-6, "event_ridge": 1e-6},
        )
        origin = ds.last_week - 13
        fc = forecast_at(ds, origin, cfg)
        assert mape(ds.collections().window(origin + 1, origin + 13), fc.forecast) < 0.5

    def test_cache_transparent(self, small_dataset, fast_config):
        o = small_dataset.last_week - 26
        cache = RunCache()
        a = forecast_at(small_dataset, o, fast_config, "h2", cache=cache)
        b = forecast_at(small_dataset, o, fast_config, "h2", cache=cache)
        c = forecast_at(small_dataset, o, fast_config, "h2")
        assert a.forecast == b.forecast == c.forecast
        with pytest.raises(ValidationError):
            forecast_at(generate(acceptance_synth(2, weeks=104)), o, fast_config, "h2", cache=cache)

    def test_stage_labels(self, small_dataset):
        cfg = from_dict({"data": {"support_series": ["nope"]}})
        with pytest.raises(DataError, match=r"^\[ingest\]"):
            forecast_at(small_dataset, small_dataset.last_week, cfg)
        with pytest.raises(DataError, match="too short"):
            evaluate(small_dataset, PipelineConfig())


class TestCompare:
    def test_degenerate_h2_equals_h1(self, small_dataset, fast_config):
        cfg = fast_config.with_overrides(windows__enabled=False, lags__enabled=False)
        cmp = compare(small_dataset, cfg)
        assert abs(cmp.uplift) < 0.5
        for w1, w2 in zip(cmp.h1.windows, cmp.h2.windows):
            for f1, f2 in zip(w1.folds, w2.folds):
                assert f1.mape == pytest.approx(f2.mape, rel=1e-9)

    def test_folds_shared(self, small_dataset, fast_config):
        cmp = compare(small_dataset, fast_config)
        assert [[f.test for f in w.folds] for w in cmp.h1.windows] == \
               [[f.test for f in w.folds] for w in cmp.h2.windows]
        for w in cmp.h1.windows:
            for f in w.folds:
                assert f.origin < f.test[0]


class TestLeakage:
    def test_audit_clean(self, small_dataset, fast_config):
        audit = LeakageAudit(small_dataset.calendar)
        run_compare(small_dataset, fast_config, audit)
        assert audit.accesses and audit.violations == []
        assert {"h1:target", "h2:closure", "h2:windows", "h2:lags", "h2:forecaster"} <= set(audit.stages())

    def test_audit_flags_leak(self, small_dataset):
        audit = LeakageAudit(small_dataset.calendar)
        audit.record(10, "probe", series=[WeeklySeries(1, np.ones(11))])
        assert len(audit.violations) == 1 and audit.summary()["violations"][0]["stage"] == "probe"

    def test_future_perturbation_invisible(self, small_dataset, fast_config):
        ds = small_dataset
        origin = ds.last_week - 26
        cutoff = ds.calendar.last_date_of(origin)
        invoices = []
        for inv in ds.invoices:
            if inv.issue_date > cutoff:
                continue  # later invoices vanish
            if inv.payment_date is not None and inv.payment_date > cutoff:
                inv = dataclasses.replace(inv, payment_date=inv.payment_date + timedelta(days=5))
            invoices.append(inv)
        support = {k: WeeklySeries(s.start, np.where(np.arange(s.start, s.end + 1) > origin, s.values * 3, s.values))
                   for k, s in ds.support.items()}
        perturbed = Dataset(tuple(invoices), support, ds.calendar, ds.observation_end)
        for variant in ("h1", "h2"):
            a = forecast_at(ds, origin, fast_config, variant)
            b = forecast_at(perturbed, origin, fast_config, variant)
            assert a.forecast == b.forecast

    def test_origins_cover_windows(self, acceptance_dataset):
        origins = evaluation_origins(acceptance_dataset, acceptance_pipeline())
        last = acceptance_dataset.last_week
        assert max(origins) == last - 13 and len(origins) == len(set(origins))
