"""Command line entry point.

Exit codes: 0 success, 2 validation/config error, 3 data error, 4 numerical
error (1 for anything else raised by the package).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import presets
from .errors import ConfigError, LedgercastError
from .pipeline import (LeakageAudit, Timer, forecast_at, ingest_config, load_config, render_markdown,
                       run_compare, run_pipeline, write_json)
from .pipeline.config import PipelineConfig, from_dict, to_dict
from .pipeline.report import write_components_csv
from .synthgen import SynthConfig, generate

log = logging.getLogger("ledgercast")
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("LEDGERCAST_LOG", "warn").lower()
    if level not in LOG_LEVELS:
        raise ConfigError(f"LEDGERCAST_LOG must be one of {', '.join(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config)
    flat = {}
    if args.seed is not None:
        flat["seed"] = args.seed
    if args.variant is not None:
        flat["variant"] = args.variant
    return cfg.with_overrides(**flat) if flat else cfg


def _out(args) -> Path:
    out = Path(args.out or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write_text(path: Path, text: str) -> None:
    path.write_text(text)
    print(path)


def cmd_generate(args) -> int:
    if args.preset:
        synth, pipe = presets.PRESETS[args.preset]
    else:
        synth, pipe = {}, {}
    if args.synth_config:
        try:
            with open(args.synth_config) as fh:
                extra = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read synth config {args.synth_config}: {exc}") from exc
        if not isinstance(extra, dict):
            raise ConfigError(f"synth config {args.synth_config} must be a mapping")
        synth = {**synth, **extra}
    if args.seed is not None:
        synth = {**synth, "seed": args.seed}
    cfg = SynthConfig.from_dict(synth)
    out = _out(args)
    ds = generate(cfg)
    for p in ds.export(out):
        print(p)
    truth = {"synth_config": cfg.to_dict(), "planted_lags": ds.truth["planted_lags"],
             "first_week": ds.truth["first_week"], "last_week": ds.truth["last_week"]}
    _write_text(out / "truth.json", json.dumps(truth, indent=2, sort_keys=True) + "\n")
    pipeline = {**pipe, "calendar": {"fiscal_year_start": cfg.fiscal_year_start.isoformat()},
                "data": {"invoices": "invoices.csv", "support": "support.csv"}, "seed": cfg.seed}
    _write_text(out / "pipeline.yaml", yaml.safe_dump(to_dict(from_dict(pipeline)), sort_keys=True))
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    ds = ingest_config(cfg)
    fc = forecast_at(ds, ds.last_week, cfg)
    bundle = {
        "variant": fc.variant,
        "origin": fc.origin,
        "config": to_dict(cfg),
        "forecaster": fc.model.to_dict() if hasattr(fc.model, "to_dict") else {
            "method": fc.model.method, "params": dict(fc.model.params)},
        "lag_specs": {k: v.to_dict() for k, v in sorted(fc.lag_specs.items())},
        "closure_model": fc.closure.to_dict() if fc.closure is not None else None,
    }
    write_json(bundle, _out(args) / "model.json")
    print(_out(args) / "model.json")
    return 0


def cmd_forecast(args) -> int:
    cfg = _config(args)
    ds = ingest_config(cfg)
    fc = forecast_at(ds, ds.last_week, cfg)
    out = _out(args)
    lines = ["week,week_start,forecast"] + [
        f"{w},{ds.calendar.first_date_of(w).isoformat()},{v!r}" for w, v in fc.forecast.entries]
    _write_text(out / "forecast.csv", "\n".join(lines) + "\n")
    return 0


def _write_report(out: Path, report: dict, timer: Timer) -> None:
    write_json(report, out / "report.json")
    print(out / "report.json")
    _write_text(out / "report.md", render_markdown(report))
    _write_text(out / "timings.json", json.dumps(timer.timings, indent=2, sort_keys=True) + "\n")


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    ds = ingest_config(cfg)
    timer = Timer()
    audit = LeakageAudit(ds.calendar)
    forecast, report = run_pipeline(ds, cfg, audit=audit, timer=timer)
    out = _out(args)
    _write_report(out, report, timer)
    if args.components:
        fc = forecast_at(ds, ds.last_week, cfg)
        print(write_components_csv(fc, cfg, ds.calendar, out / "components.csv"))
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    cfg = replace(cfg, variant="h2")
    ds = ingest_config(cfg)
    timer = Timer()
    audit = LeakageAudit(ds.calendar)
    cmp, report = run_compare(ds, cfg, audit=audit, timer=timer)
    _write_report(_out(args), report, timer)
    print(f"H1 final score {cmp.h1.final_score:.3f}  H2 final score {cmp.h2.final_score:.3f}  "
          f"uplift {cmp.uplift:.2f}%")
    return 0


def cmd_tune(args) -> int:
    from .tune import config_with_params, tune_pipeline

    cfg = _config(args)
    cfg = replace(cfg, variant="h2")
    ds = ingest_config(cfg)
    budget = args.budget or cfg.tune.budget
    method = args.method or cfg.tune.method

    def progress(trial):
        log.info("trial %d loss %.4f", trial.index, trial.loss)

    res = tune_pipeline(ds, cfg, budget, cfg.seed, method=method, on_trial=progress)
    out = _out(args)
    print(res.to_csv(out / "trials.csv"))
    best = config_with_params(cfg, res.best_params)
    _write_text(out / "best_config.yaml", yaml.safe_dump(to_dict(best), sort_keys=True))
    summary = {"best_loss": res.best_loss, "default_loss": res.history[0].loss, "budget": budget,
               "seed": res.seed, "method": res.method, "best_params": res.best_params}
    write_json(summary, out / "tune.json")
    print(out / "tune.json")
    return 0


def cmd_report(args) -> int:
    path = Path(args.report or (Path(args.out or ".") / "report.json"))
    try:
        report = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {path}: {exc}") from exc
    target = Path(args.markdown) if args.markdown else path.with_suffix(".md")
    _write_text(target, render_markdown(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config (YAML or JSON)")
    common.add_argument("--seed", type=int, help="seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--variant", choices=("h1", "h2"), help="pipeline variant")

    parser = argparse.ArgumentParser(prog="ledgercast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    p.add_argument("--preset", choices=sorted(presets.PRESETS), help="start from a pinned preset")
    p.add_argument("--synth-config", help="YAML file with synthetic generator settings")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common], help="fit on all data and save the model bundle")
    p.set_defaults(func=cmd_train)
    p = sub.add_parser("forecast", parents=[common], help="forecast the next horizon")
    p.set_defaults(func=cmd_forecast)
    p = sub.add_parser("evaluate", parents=[common], help="walk-forward evaluation of one variant")
    p.add_argument("--components", action="store_true", help="also write components.csv")
    p.set_defaults(func=cmd_evaluate)
    p = sub.add_parser("compare", parents=[common], help="H1 vs H2 on identical folds")
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("tune", parents=[common], help="tune H2 hyperparameters")
    p.add_argument("--budget", type=int, help="number of trials")
    p.add_argument("--method", choices=("gp", "random"))
    p.set_defaults(func=cmd_tune)
    p = sub.add_parser("report", parents=[common], help="render report.md from report.json")
    p.add_argument("--report", help="path to report.json (default: <out>/report.json)")
    p.add_argument("--markdown", help="output path (default: next to the JSON)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _setup_logging()
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        return args.func(args)
    except LedgercastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
