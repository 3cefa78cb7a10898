from __future__ import annotations

import numpy as np
import pytest

from ledgercast.core import Segment
from ledgercast.dataset import Dataset, load_dataset
from ledgercast.errors import ConfigError
from ledgercast.profiles import payment_delay
from ledgercast.synthgen import SynthConfig, generate


def test_deterministic(small_dataset):
    cfg = SynthConfig(seed=7, weeks=104, n_customers_per_segment={"CSB": 4, "Commercial": 3, "Enterprise": 2})
    again = generate(cfg)
    assert again == small_dataset
    assert again.truth["collections"] == small_dataset.truth["collections"]


def test_seed_changes_output(small_dataset):
    cfg = SynthConfig(seed=8, weeks=104, n_customers_per_segment={"CSB": 4, "Commercial": 3, "Enterprise": 2})
    assert generate(cfg) != small_dataset


def test_constant_support_steady_state():
    cfg = SynthConfig.from_dict({
        "seed": 1, "weeks": 30, "noise_std": 0.0,
        "planted_lags": {"non_q4": [[3, 2.0]], "q4": [[3, 2.0]]},
        "support": {"level": 10.0, "noise_std": 0.0},
    })
    ds = generate(cfg)
    coll = ds.collections()
    assert coll.start == cfg.first_week and coll.end == cfg.last_week
    assert np.allclose(coll.values, 20.0, atol=0)


def test_planted_structure_recoverable():
    cfg = SynthConfig.from_dict({
        "seed": 4, "weeks": 104, "noise_std": 0.0,
        "planted_lags": {"non_q4": [[3, 2.0], [5, 0.5]], "q4": [[2, 2.5]]},
        "n_customers_per_segment": {"CSB": 2, "Commercial": 2, "Enterprise": 2},
    })
    ds = generate(cfg)
    cal = ds.calendar
    signal = ds.truth["signal"].slice(cfg.first_week, cfg.last_week)
    sup = ds.truth["support"][cfg.support_name]
    for regime, planted in cfg.planted_lags.items():
        weeks = [w for w in signal.weeks if cal.is_q4(int(w)) == (regime == "q4")]
        X = np.column_stack([sup.take(np.array(weeks) - lag) for lag, _ in planted])
        coef, *_ = np.linalg.lstsq(X, signal.take(weeks), rcond=None)
        np.testing.assert_allclose(coef, [c for _, c in planted], atol=1e-9)


def test_collections_match_invoices(small_dataset):
    ds = small_dataset
    lo, hi = ds.truth["first_week"], ds.truth["last_week"]
    realized = ds.collections()
    assert realized.start == lo and realized.end == hi
    np.testing.assert_allclose(realized.values, ds.truth["collections"].slice(lo, hi).values, atol=1e-9)


def test_open_invoices_at_span_end(small_dataset):
    ds = small_dataset
    open_ = [i for i in ds.invoices if i.payment_date is None]
    assert open_
    assert all(i.issue_date <= ds.observation_end for i in ds.invoices)
    # open invoices cluster near the end of the span
    assert min(i.issue_date for i in open_) > ds.calendar.first_date_of(ds.truth["first_week"] + 52)


def test_support_spans_window(small_dataset):
    s = small_dataset.support["orders"]
    assert s.start <= small_dataset.truth["first_week"] and s.end == small_dataset.truth["last_week"]


def _delays(ds, seg):
    return np.array([payment_delay(i) for i in ds.invoices if i.segment == seg and i.payment_date is not None])


def test_segment_mean_delay_law_of_large_numbers():
    cfg = SynthConfig.from_dict({
        "seed": 21, "weeks": 208, "n_customers_per_segment": {"Commercial": 50},
        "payment_terms": {"Commercial": 45},
        "delay_distributions": {"Commercial": {"mean_days": 5.0, "std_days": 3.0}},
    })
    d = _delays(generate(cfg), Segment.COMMERCIAL)
    assert len(d) >= 10_000
    assert abs(d.mean() - 5.0) < 0.3


def test_segments_separable():
    cfg = SynthConfig.from_dict({
        "seed": 3, "weeks": 104,
        "n_customers_per_segment": {"CSB": 10, "Commercial": 10, "Enterprise": 10},
        "delay_distributions": {
            "CSB": {"mean_days": 0.0, "std_days": 1.0},
            "Commercial": {"mean_days": 5.0, "std_days": 1.0},
            "Enterprise": {"mean_days": 10.0, "std_days": 1.0},
        },
    })
    ds = generate(cfg)
    means = []
    for seg in (Segment.CSB, Segment.COMMERCIAL, Segment.ENTERPRISE):
        d = _delays(ds, seg)
        assert len(d) >= 1000
        means.append(d.mean())
    assert means == sorted(means)
    assert np.allclose(means, [0, 5, 10], atol=0.2)


@pytest.mark.parametrize("patch", [
    {"weeks": 12},
    {"noise_std": -0.1},
    {"n_customers_per_segment": {"CSB": 0}},
    {"planted_lags": {"non_q4": [[3, float("inf")]], "q4": [[2, 1.0]]}},
    {"holiday_weeks": [[60, 0.0]]},
    {"bogus": 1},
])
def test_invalid_config(patch):
    with pytest.raises(ConfigError):
        SynthConfig.from_dict({"seed": 1, **patch})


def test_config_round_trip():
    cfg = SynthConfig.from_dict({"seed": 9, "recurring_holidays": [[47, 1.25]]})
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg
    assert (47 + 52, 1.25) in cfg.holiday_weeks


def test_export_round_trip(tmp_path, small_dataset):
    small_dataset.export(tmp_path)
    back = load_dataset(tmp_path, small_dataset.calendar)
    assert back.invoices == small_dataset.invoices
    assert back.support == small_dataset.support


def test_export_empty(tmp_path, cal):
    Dataset((), {}, cal).export(tmp_path)
    assert (tmp_path / "invoices.csv").read_text().count("\n") == 1
    assert (tmp_path / "support.csv").read_text().count("\n") == 1


def test_export_three_invoices(tmp_path, small_dataset):
    ds = Dataset(small_dataset.invoices[:3], {}, small_dataset.calendar)
    ds.export(tmp_path)
    assert len((tmp_path / "invoices.csv").read_text().splitlines()) == 4
