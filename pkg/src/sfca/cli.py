"""Command-line entry point: ``sfca <command> [options]``.

Exit status is 0 on success and 2 for bad flags or configuration. Any other
failure exits with 1 after printing one JSON line to stderr of the form
``{"error": ..., "type": ..., "command": ...}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, RunConfig, load_config
from .decode import ScoreTrace, decode_times
from .evaluation import (
    FeatureCache,
    benchmark_matrix,
    regression_row,
    report_from_dict,
    report_to_dict,
    scalar_targets,
)
from .features import FeatureSchema, assemble_features
from .learners import ModelSpec, fit, predict, save_model
from .learners.linear import SingularSystemWarning
from .pipeline import build_records, electricity_weeks, internet_weeks
from .report import (
    decode_audit_figure, format_text_table, week_figure, write_all, write_report_csv, write_scatter_csv,
)
from .synth import generate_corpus
from .transform import label_design, stack

log = logging.getLogger("sfca")


class UsageError(Exception):
    pass


# --------------------------------------------------------------- helpers


def _data_dir(args, cfg: RunConfig) -> Path:
    return Path(args.data or cfg.paths.data)


def _out_dir(args, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.paths.out)


def load_weeks(data: Path, source: str, cfg: RunConfig):
    """Synthetic weeks of one source from a data directory."""
    settings = cfg.preprocess_settings()
    grid = cfg.segment_grid()
    if source == "internet":
        files = sorted((data / "traces").glob("*.csv"))
        if not files:
            raise FileNotFoundError(f"no trace files in {data / 'traces'}")
        days = [d for f in files for d in io.read_traces(f, grid.segments_per_day)]
        return internet_weeks(days, settings)
    if source == "electricity":
        return electricity_weeks(io.read_demand(data / "demand.csv"), grid, settings)
    raise UsageError(f"unknown source {source!r}")


def load_records(data: Path, source: str, cfg: RunConfig, weeks_file: str | None = None):
    if weeks_file:
        weeks = io.read_weeks(weeks_file, cfg.grid.segments_per_day)
    else:
        weeks = load_weeks(data, source, cfg)
    outcomes = io.read_outcomes(data / "outcomes.csv")
    static_path = data / "static.csv"
    lats = io.read_static(static_path) if static_path.exists() else {}
    return build_records(weeks, outcomes, lats)


def _schema(source: str, cfg: RunConfig) -> FeatureSchema:
    lat = cfg.features.internet_latitude if source == "internet" else cfg.features.electricity_latitude
    return FeatureSchema.for_source(source, cfg.grid.segments_per_day, lat)


# -------------------------------------------------------------- commands


def cmd_synth(args, cfg: RunConfig) -> dict:
    s = cfg.synth
    cities = args.cities if args.cities is not None else s.cities
    days = args.days if args.days is not None else s.days
    sigma = args.sigma if args.sigma is not None else s.noise_sigma
    steep = args.steepness if args.steepness is not None else s.steepness
    noise = args.noise or s.noise
    if cities < 3 or days < 7:
        raise UsageError("synth needs --cities >= 3 and --days >= 7")
    corpus = generate_corpus(
        cities, days, cfg.seed, sigma, steep, tuple(s.years), cfg.segment_grid(), noise
    )
    out = Path(args.out or cfg.paths.data)
    by_city = {}
    for c in corpus:
        by_city.setdefault(c.params.city_id, []).extend(c.days)
    for city, city_days in by_city.items():
        io.write_traces(out / "traces" / f"{city}.csv", city_days)
    io.write_demand(out / "demand.csv", (
        (c.params.city_id, c.year, date, dow, mw) for c in corpus for date, dow, mw in c.demand
    ))
    io.write_outcomes(out / "outcomes.csv", {(c.params.city_id, c.year): c.outcomes for c in corpus})
    io.write_static(out / "static.csv", {c.params.city_id: c.params.latitude for c in corpus})
    io.write_weeks(out / "truth.csv", {(c.params.city_id, c.year): c.clean for c in corpus})
    return {"cities": len(by_city), "city_years": len(corpus), "out": str(out)}


def cmd_preprocess(args, cfg: RunConfig) -> dict:
    weeks = load_weeks(_data_dir(args, cfg), args.source, cfg)
    out = Path(args.out) if args.out else _out_dir(args, cfg) / f"weeks_{args.source}.csv"
    io.write_weeks(out, weeks)
    if args.figure:
        week_figure(weeks, args.figure, title=f"{args.source} synthetic weeks")
    return {"city_years": len(weeks), "out": str(out)}


def cmd_features(args, cfg: RunConfig) -> dict:
    records = load_records(_data_dir(args, cfg), args.source, cfg, args.weeks)
    schema = _schema(args.source, cfg)
    design = stack([assemble_features(r, schema) for r in records])
    labels = None
    if args.activity:
        labels = label_design(
            design, {r.key: r.outcomes[args.activity] for r in records}, args.activity, cfg.segment_grid()
        ).values
    out = Path(args.out) if args.out else _out_dir(args, cfg) / f"features_{args.source}.csv"
    io.write_design(out, design, labels)
    return {"rows": len(design), "columns": len(design.columns), "out": str(out)}


def _spec(args, cfg: RunConfig) -> ModelSpec:
    try:
        return cfg.model_spec(args.method)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_train(args, cfg: RunConfig) -> dict:
    records = load_records(_data_dir(args, cfg), args.source, cfg, args.weeks)
    spec = _spec(args, cfg)
    cache = FeatureCache(records, args.source, cfg.eval_settings())
    act = args.activity
    if spec.is_classifier:
        design = stack([cache.tables[r.key] for r in records])
        y = label_design(design, {r.key: r.outcomes[act] for r in records}, act, cfg.segment_grid()).values
        w = None
        if spec.weighted:
            w = np.concatenate([
                np.full(design.rows_of(r.key).size, float(r.outcomes[act].respondents)) for r in records
            ])
        model = fit(spec, design, y, w, n_jobs=args.jobs or 1)
    else:
        if args.target is None:
            raise UsageError("regression methods need --target start|stop|duration")
        X = np.vstack([cache.wide(r.key) for r in records])
        y = np.array([scalar_targets(r, act, None)[args.target] for r in records])
        w = np.array([float(r.outcomes[act].respondents) for r in records]) if spec.weighted else None
        model = fit(spec, X, y, w, feature_names=cache.wide_names, n_jobs=args.jobs or 1)
    out = Path(args.out) if args.out else _out_dir(args, cfg) / f"model_{spec.family}_{args.source}_{act}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    return {"method": spec.label, "out": str(out)}


def cmd_evaluate(args, cfg: RunConfig) -> dict:
    settings = cfg.eval_settings(args.jobs)
    problems = cfg.problems()
    methods = cfg.model_specs()
    if args.methods:
        methods = [cfg.model_spec(m.strip()) for m in args.methods.split(",") if m.strip()]
    data = _data_dir(args, cfg)
    sources = sorted({p.source for p in problems})
    records = {s: load_records(data, s, cfg) for s in sources}
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularSystemWarning)
        report = benchmark_matrix(records, methods, problems, settings)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, out / "report.csv")
    (out / "report.txt").write_text(format_text_table(report), encoding="utf-8")
    write_scatter_csv(report, out / "scatter.csv", _scatter_threshold(cfg, report), cfg.report.ci_sd_min)
    (out / "evaluation.json").write_text(
        json.dumps(report_to_dict(report), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return {
        "cells": len(report.cells), "failed": len(report.failures),
        "leaked_rows": report.leaked_rows, "seconds": round(time.perf_counter() - t0, 1), "out": str(out),
    }


def _scatter_threshold(cfg: RunConfig, report):
    i = cfg.report.scatter_filter
    if not 0 <= i < len(report.thresholds):
        raise UsageError(f"report.scatter_filter must index one of {len(report.thresholds)} filters")
    return report.thresholds[i]


def cmd_report(args, cfg: RunConfig) -> dict:
    src = Path(args.evaluation) if args.evaluation else _out_dir(args, cfg) / "evaluation.json"
    report = report_from_dict(json.loads(src.read_text(encoding="utf-8")))
    out = Path(args.out) if args.out else src.parent
    methods = [m.strip() for m in args.methods.split(",")] if args.methods else None
    written = write_all(
        report, out, tuple(cfg.report.formats), cfg.report.ci_sd_min,
        _scatter_threshold(cfg, report), methods,
    )
    return {"files": len(written), "out": str(out)}


def cmd_decode(args, cfg: RunConfig) -> dict:
    """Train on every other city, decode one city-year and dump each stage."""
    records = load_records(_data_dir(args, cfg), args.source, cfg, args.weeks)
    spec = _spec(args, cfg)
    if not spec.is_classifier:
        raise UsageError(f"{spec.label} is a regression method; decode needs a classifier")
    target = [r for r in records if r.city_id == args.city and (args.year is None or r.year == args.year)]
    if not target:
        raise UsageError(f"no record for city {args.city!r}")
    rec = target[0]
    train = [r for r in records if r.city_id != rec.city_id]
    grid = cfg.segment_grid()
    schema = _schema(args.source, cfg)
    design = stack([assemble_features(r, schema) for r in train])
    y = label_design(design, {r.key: r.outcomes[args.activity] for r in train}, args.activity, grid).values
    model = fit(replace(spec, seed=cfg.seed), design, y, n_jobs=args.jobs or 1)
    t = stack([assemble_features(rec, schema)])
    scores = np.full(grid.segments_per_day, np.nan)
    scores[t.segments - 1] = np.clip(predict(model, t).scores, 0, 1)
    times, audit = decode_times(
        ScoreTrace(rec.city_id, rec.year, args.activity, scores), grid, args.activity,
        cfg.decode_settings(), audit=True,
    )
    out = Path(args.out) if args.out else _out_dir(args, cfg) / f"decode_{rec.city_id}_{rec.year}_{args.activity}.csv"
    io.write_decode_audit(out, audit)
    truth = rec.outcomes.get(args.activity)
    if args.figure:
        decode_audit_figure(
            audit, args.figure, (truth.start_min, truth.stop_min) if truth else None,
            f"{rec.city_id} {rec.year} {args.activity} ({spec.label})",
        )
    result = {"city_id": rec.city_id, "year": rec.year, "start_min": round(times.start_min, 2),
              "stop_min": round(times.stop_min, 2), "out": str(out)}
    if truth:
        result.update(true_start_min=truth.start_min, true_stop_min=truth.stop_min)
    return result


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (section.key = value)")
    common.add_argument("--seed", type=int, help="override the configured master seed")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="data directory (traces/, demand.csv, outcomes.csv, static.csv)")

    src = argparse.ArgumentParser(add_help=False)
    src.add_argument("--source", required=True, choices=("internet", "electricity"))
    src.add_argument("--weeks", help="precomputed synthetic weeks CSV (skips preprocessing)")

    p = argparse.ArgumentParser(prog="sfca", description="Segmented functional classification analysis")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    s.add_argument("--cities", type=int)
    s.add_argument("--days", type=int)
    s.add_argument("--sigma", type=float, help="noise standard deviation")
    s.add_argument("--steepness", type=float, help="edge steepness per minute (inf for steps)")
    s.add_argument("--noise", choices=("gaussian", "burst"))
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("preprocess", parents=[common, data], help="raw traces to synthetic weeks")
    s.add_argument("--source", required=True, choices=("internet", "electricity"))
    s.add_argument("--figure", help="also draw Monday and Sunday traces to this file")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("features", parents=[common, data, src], help="stacked per-segment features")
    s.add_argument("--activity", choices=("sleep", "work"), help="add a label column for this activity")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train", parents=[common, data, src], help="fit one method on all city-years")
    s.add_argument("--activity", required=True, choices=("sleep", "work"))
    s.add_argument("--method", required=True, help="method label or family, e.g. c-tree(bg)")
    s.add_argument("--target", choices=("start", "stop", "duration"), help="regression target")
    s.add_argument("--jobs", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", parents=[common, data], help="leave-one-city-out benchmark")
    s.add_argument("--methods", help="comma-separated method labels (overrides the config)")
    s.add_argument("--jobs", type=int, help="concurrent folds")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("decode", parents=[common, data, src], help="decode audit for one city-year")
    s.add_argument("--activity", required=True, choices=("sleep", "work"))
    s.add_argument("--city", required=True)
    s.add_argument("--year", type=int)
    s.add_argument("--method", default="c-tree(bg)")
    s.add_argument("--figure", help="also draw the audit to this file")
    s.add_argument("--jobs", type=int)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("report", parents=[common], help="tables and figures from an evaluation")
    s.add_argument("--evaluation", help="evaluation.json written by 'evaluate'")
    s.add_argument("--methods", help="comma-separated methods to draw (default: all)")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for name in ("jobs",):
        if getattr(args, name, None) is not None and getattr(args, name) < 1:
            parser.print_usage(sys.stderr)
            print(f"sfca: error: --{name} must be >= 1", file=sys.stderr)
            return 2
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        result = args.func(args, cfg)
    except (ConfigError, UsageError) as e:
        parser.print_usage(sys.stderr)
        print(f"sfca {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - top-level error contract
        if args.verbose:
            log.exception("command failed")
        print(json.dumps({"error": str(e), "type": type(e).__name__, "command": args.command}), file=sys.stderr)
        return 1
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
