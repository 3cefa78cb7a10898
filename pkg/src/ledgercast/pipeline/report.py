"""Run reports: JSON (byte-stable), markdown and per-component CSV.

Wall-clock timings change run to run, so they go to a separate file and
never into the JSON report.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..core import FiscalCalendar
from ..dataset import Dataset
from ..errors import DataError
from ..forecaster import AdditiveModel, decompose
from ..metrics import deviation_summary
from .audit import LeakageAudit
from .config import PipelineConfig, event_weeks, to_dict
from .evaluate import Comparison, EvalResult, closure_accuracy
from .run import OriginForecast

REPORT_VERSION = 1


def dataset_fingerprint(dataset: Dataset) -> str:
    h = hashlib.sha256()
    for inv in dataset.invoices:
        h.update(repr((inv.invoice_id, inv.customer_id, inv.segment.value, inv.issue_date.isoformat(),
                       inv.due_date.isoformat(), str(inv.amount),
                       inv.payment_date.isoformat() if inv.payment_date else None,
                       inv.payment_terms_days)).encode())
    for name, s in sorted(dataset.support.items()):
        h.update(repr((name, s.start, s.to_list())).encode())
    return h.hexdigest()


def eval_to_dict(res: EvalResult) -> dict[str, Any]:
    return {
        "variant": res.variant,
        "final_score": res.final_score,
        "windows": [
            {
                "end_week": w.end_week,
                "score": w.score,
                "folds": [
                    {"fold": f.index, "origin": f.origin, "test_weeks": list(f.test),
                     "weight": f.weight, "mape": f.mape}
                    for f in w.folds
                ],
            }
            for w in res.windows
        ],
    }


def forecast_to_dict(fc: OriginForecast, cal: FiscalCalendar) -> dict[str, Any]:
    return {
        "variant": fc.variant,
        "origin": fc.origin,
        "weeks": [
            {"week": w, "week_start": cal.first_date_of(w).isoformat(), "value": v}
            for w, v in fc.forecast.entries
        ],
    }


def component_shares(fc: OriginForecast, config: PipelineConfig, cal: FiscalCalendar) -> dict[str, float]:
    if not isinstance(fc.model, AdditiveModel):
        return {}
    return decompose(fc.model, fc.target.weeks, fc.regressors, event_weeks(config, cal)).shares


def model_summary(fc: OriginForecast, config: PipelineConfig, cal: FiscalCalendar) -> dict[str, Any]:
    out: dict[str, Any] = {"origin": fc.origin, "train_weeks": [fc.target.start, fc.target.end]}
    if isinstance(fc.model, AdditiveModel):
        out["component_shares"] = component_shares(fc, config, cal)
        out["regressor_effects"] = fc.model.regressor_effects()
        out["changepoints"] = list(fc.model.changepoints)
    else:
        out["univariate"] = {"method": fc.model.method, "params": dict(fc.model.params)}
    if fc.lag_specs:
        out["lag_specs"] = {k: v.to_dict() for k, v in sorted(fc.lag_specs.items())}
    if fc.closure is not None:
        gbt = fc.closure.gbt
        out["closure_model"] = {"n_train": fc.closure.n_train, "n_trees": len(gbt.trees),
                                "train_mse_first": gbt.train_loss[0], "train_mse_last": gbt.train_loss[-1]}
    out["used_lagged_support"] = fc.used_lagged_support
    out["used_windowed_regressors"] = fc.used_windowed_regressors
    return out


def _header(dataset: Dataset, config: PipelineConfig) -> dict[str, Any]:
    return {
        "report_version": REPORT_VERSION,
        "config": to_dict(config),
        "dataset": {
            "fingerprint": dataset_fingerprint(dataset),
            "n_invoices": len(dataset.invoices),
            "n_open": sum(1 for inv in dataset.invoices if inv.payment_date is None),
            "first_week": dataset.first_week,
            "last_week": dataset.last_week,
            "support_series": sorted(dataset.support),
        },
        "payment_deviation_days": deviation_summary(dataset.invoices),
    }


def run_report(dataset: Dataset, config: PipelineConfig, result: EvalResult, final: OriginForecast,
               audit: LeakageAudit | None = None) -> dict[str, Any]:
    cal = dataset.calendar
    rep = _header(dataset, config)
    rep["evaluation"] = eval_to_dict(result)
    rep["forecast"] = forecast_to_dict(final, cal)
    rep["model"] = model_summary(final, config, cal)
    if result.variant == "h2" and config.windows.enabled:
        rep["closure_error_days"] = closure_accuracy(dataset, result)
    if audit is not None:
        rep["leakage_audit"] = audit.summary()
    return rep


def compare_report(dataset: Dataset, config: PipelineConfig, cmp: Comparison, final_h1: OriginForecast,
                   final_h2: OriginForecast, audit: LeakageAudit | None = None) -> dict[str, Any]:
    cal = dataset.calendar
    rep = _header(dataset, config)
    rep["h1"] = {"evaluation": eval_to_dict(cmp.h1), "forecast": forecast_to_dict(final_h1, cal),
                 "model": model_summary(final_h1, config, cal)}
    rep["h2"] = {"evaluation": eval_to_dict(cmp.h2), "forecast": forecast_to_dict(final_h2, cal),
                 "model": model_summary(final_h2, config, cal)}
    if config.windows.enabled:
        rep["h2"]["closure_error_days"] = closure_accuracy(dataset, cmp.h2)
    rep["final_score"] = {"h1": cmp.h1.final_score, "h2": cmp.h2.final_score}
    rep["accuracy_uplift_pct"] = cmp.uplift
    if audit is not None:
        rep["leakage_audit"] = audit.summary()
    return rep


def _clean(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return obj
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(report: Mapping[str, Any]) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(report: Mapping[str, Any], path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(report))
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    return path


def _fmt(x: float) -> str:
    return f"{x:.3f}" if isinstance(x, (int, float)) and math.isfinite(x) else "n/a"


def _eval_md(ev: Mapping[str, Any]) -> list[str]:
    lines = ["| window end | fold | origin | test weeks | weight | MAPE % |", "|---|---|---|---|---|---|"]
    for w in ev["windows"]:
        for f in w["folds"]:
            lines.append(f"| {w['end_week']} | {f['fold']} | {f['origin']} | {f['test_weeks'][0]}-{f['test_weeks'][1]} "
                         f"| {_fmt(f['weight'])} | {_fmt(f['mape'])} |")
    lines.append("")
    lines += [f"- window {w['end_week']}: score {_fmt(w['score'])}" for w in ev["windows"]]
    lines.append(f"- final score: **{_fmt(ev['final_score'])}**")
    return lines


def _model_md(m: Mapping[str, Any]) -> list[str]:
    lines = []
    if "component_shares" in m:
        lines.append("Component shares (mean |contribution|):")
        lines += [f"- {k}: {v:.3f}" for k, v in sorted(m["component_shares"].items(), key=lambda kv: -kv[1])]
    for name, spec in sorted(m.get("lag_specs", {}).items()):
        for regime, terms in sorted(spec["regimes"].items()):
            desc = ", ".join(f"lag {t['lag']} (b={t['coefficient']:.3f})" for t in terms)
            lines.append(f"- lags for {name}, {regime}: {desc}")
    return lines


def render_markdown(report: Mapping[str, Any]) -> str:
    ds = report["dataset"]
    lines = ["# Collections forecast report", "",
             f"Data: {ds['n_invoices']} invoices ({ds['n_open']} open), weeks {ds['first_week']}-{ds['last_week']}, "
             f"support: {', '.join(ds['support_series']) or 'none'}.", ""]
    if "accuracy_uplift_pct" in report:
        lines += [f"H1 final score {_fmt(report['final_score']['h1'])}, H2 final score "
                  f"{_fmt(report['final_score']['h2'])}, uplift **{_fmt(report['accuracy_uplift_pct'])}%**.", ""]
        for v in ("h1", "h2"):
            lines += [f"## {v.upper()}", ""] + _eval_md(report[v]["evaluation"]) + [""] + _model_md(report[v]["model"]) + [""]
    else:
        lines += ["## Evaluation", ""] + _eval_md(report["evaluation"]) + [""]
        lines += ["## Model", ""] + _model_md(report["model"]) + [""]
    fc = report["h2"]["forecast"] if "h2" in report else report["forecast"]
    lines += ["## Forecast", "", "| week | starts | value |", "|---|---|---|"]
    lines += [f"| {r['week']} | {r['week_start']} | {r['value']:.2f} |" for r in fc["weeks"]]
    audit = report.get("leakage_audit")
    if audit is not None:
        lines += ["", f"Leakage audit: {audit['n_accesses']} accesses, {len(audit['violations'])} violations."]
    return "\n".join(lines) + "\n"


def write_components_csv(fc: OriginForecast, config: PipelineConfig, cal: FiscalCalendar,
                         path: str | Path) -> Path:
    """Per-week component contributions over the training span and the forecast."""
    if not isinstance(fc.model, AdditiveModel):
        raise DataError("component export needs an additive model")
    weeks = np.arange(fc.target.start, fc.forecast.end + 1)
    dec = decompose(fc.model, weeks, fc.regressors, event_weeks(config, cal))
    names = list(dec.components)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["week", "week_start", "actual", "prediction"] + names)
        for i, week in enumerate(weeks):
            week = int(week)
            actual = fc.target.get(week, float("nan")) if week in fc.target else ""
            w.writerow([week, cal.first_date_of(week).isoformat(), actual if actual == "" else repr(actual),
                        repr(float(dec.prediction.values[i]))]
                       + [repr(float(dec.components[n].values[i])) for n in names])
    return path
