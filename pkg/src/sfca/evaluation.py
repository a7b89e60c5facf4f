"""Leave-one-city-out benchmarking of SFCA against untransformed regression.

A *problem* is one (source, activity, target) triple, giving twelve in all.
SFCA methods learn per-segment labels and recover start and stop times by
decoding; the duration is then the decoded stop minus the decoded start.
Regression methods see one wide row per city-year and predict each scalar
target directly.
"""

from __future__ import annotations

import itertools
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .decode import DecodeSettings, NoTransitionError, ScoreTrace, decode_times
from .features import FeatureSchema, FeatureTable, SOURCES, assemble_features
from .grid import DOW_NAMES, MINUTES_PER_DAY, SegmentGrid
from .learners import ModelSpec, fit, predict
from .synth import FILTER_THRESHOLDS, stable_seed
from .trajectory import ACTIVITIES, CityYearRecord
from .transform import StackedDesign, label_design, stack

log = logging.getLogger(__name__)

TARGETS = ("start", "stop", "duration")
REGRESSION_TYPES = ("REG", "pREG", "REG-T")


class LeakError(RuntimeError):
    """A training set contained rows of the held-out city."""


class EmptySubsetError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ProblemSpec:
    source: str
    activity: str
    target: str

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.activity not in ACTIVITIES:
            raise ValueError(f"unknown activity {self.activity!r}")
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}")

    @property
    def label(self) -> str:
        return f"{self.source}/{self.activity}:{self.target}"

    @property
    def circular(self) -> bool:
        return self.target != "duration"

    @classmethod
    def parse(cls, label: str) -> "ProblemSpec":
        try:
            source, rest = label.split("/")
            activity, target = rest.split(":")
        except ValueError:
            raise ValueError(f"problem label {label!r} is not source/activity:target") from None
        return cls(source, activity, target)

    @classmethod
    def all(cls) -> list["ProblemSpec"]:
        return [cls(s, a, t) for s in SOURCES for a in ACTIVITIES for t in TARGETS]


def population_filter(records: Sequence[CityYearRecord], threshold: float) -> list[CityYearRecord]:
    """Records whose population is strictly greater than ``threshold``."""
    out = []
    for r in records:
        pop = r.population
        if pop is None:
            raise ValueError(f"record {r.key} has no population")
        if pop > threshold:
            out.append(r)
    if not out:
        raise EmptySubsetError(f"no records with population > {threshold:g}")
    return out


def circular_difference(a, b) -> np.ndarray:
    """Signed difference ``a - b`` wrapped into [-720, 720)."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return (d + MINUTES_PER_DAY / 2) % MINUTES_PER_DAY - MINUTES_PER_DAY / 2


def rmse(predicted, observed, circular: bool = False) -> float:
    """Root-mean-square error in minutes, optionally on the 24-hour circle."""
    p = np.asarray(predicted, dtype=float).ravel()
    o = np.asarray(observed, dtype=float).ravel()
    if p.size != o.size:
        raise ValueError(f"length mismatch: {p.size} predictions, {o.size} observations")
    if p.size == 0:
        raise ValueError("rmse needs at least one value")
    d = circular_difference(p, o) if circular else p - o
    return float(np.sqrt(np.mean(d * d)))


def geometric_mean(values) -> float:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("geometric mean of no values")
    if np.any(~(v > 0)):
        raise ValueError("geometric mean needs strictly positive values")
    return float(np.exp(np.mean(np.log(v))))


@dataclass(frozen=True)
class EvalSettings:
    """Knobs shared by every fold.

    ``sleep_origin_min`` is where the regression route cuts the clock for
    sleep times, so that an evening onset and a morning wake become ordinary
    unwrapped numbers.
    """

    grid: SegmentGrid = SegmentGrid()
    decode: DecodeSettings = DecodeSettings()
    thresholds: tuple = FILTER_THRESHOLDS
    seed: int = 0
    n_jobs: int = 1
    include_latitude: dict = field(default_factory=dict)
    sleep_origin_min: float = 720.0


@dataclass(frozen=True)
class Prediction:
    city_id: str
    year: int
    predicted: float
    observed: float
    respondents: int


@dataclass
class FoldAudit:
    held_out: str
    train_cities: tuple
    train_rows: int
    leaked_rows: int


class LeakMonitor:
    """Thread-safe log of fold training sets.

    Every fold reports the city ids of its training rows. A fold that would
    train on the held-out city raises :class:`LeakError` before fitting.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.folds: list[FoldAudit] = []

    def check(self, held_out: str, row_city_ids) -> None:
        ids = np.asarray(row_city_ids)
        leaked = int(np.count_nonzero(ids == held_out))
        audit = FoldAudit(held_out, tuple(sorted(set(ids.tolist()))), int(ids.size), leaked)
        with self._lock:
            self.folds.append(audit)
        if leaked:
            raise LeakError(f"fold {held_out}: {leaked} training rows from the held-out city")

    @property
    def total_leaked(self) -> int:
        return sum(f.leaked_rows for f in self.folds)


def _to_origin(minutes, origin):
    return (np.asarray(minutes, dtype=float) - origin) % MINUTES_PER_DAY


def _from_origin(values, origin):
    return (np.asarray(values, dtype=float) + origin) % MINUTES_PER_DAY


def scalar_targets(record: CityYearRecord, activity: str, settings: EvalSettings) -> dict:
    """Observed start, stop and duration in clock minutes."""
    o = record.outcomes[activity]
    return {"start": o.start_min, "stop": o.stop_min, "duration": o.duration_min}


def regression_row(record: CityYearRecord, table: FeatureTable) -> tuple[np.ndarray, list[str]]:
    """Wide row: full week trace, derived per-segment features, statics."""
    schema = table.schema
    trace = record.week.wide()
    names = [
        f"trace_{DOW_NAMES[d]}_{s:03d}"
        for d in range(7) for s in range(1, schema.segments_per_day + 1)
    ]
    parts = [trace]
    for j, desc in enumerate(schema.segment_features):
        if desc.kind == "level":
            continue
        parts.append(table.block[:, j])
        names += [f"{desc.name}_{s:03d}" for s in table.segments]
    parts.append(table.statics)
    names += [d.name for d in schema.static_features]
    return np.concatenate(parts), names


class FeatureCache:
    """Per-record feature tables and wide rows, computed once per source."""

    def __init__(self, records: Sequence[CityYearRecord], source: str, settings: EvalSettings):
        self.schema = FeatureSchema.for_source(
            source, settings.grid.segments_per_day, settings.include_latitude.get(source)
        )
        self.tables = {r.key: assemble_features(r, self.schema) for r in records}
        self._rows = {}
        self._row_names = None
        self._records = {r.key: r for r in records}

    def wide(self, key):
        if key not in self._rows:
            row, names = regression_row(self._records[key], self.tables[key])
            self._rows[key] = row
            self._row_names = names
        return self._rows[key]

    @property
    def wide_names(self):
        if self._row_names is None:
            self.wide(next(iter(self._records)))
        return self._row_names


@dataclass
class ActivityPredictions:
    """LOOCV output for one (method, source, activity) and record subset."""

    predictions: dict  # target -> list[Prediction]
    excluded: list  # (city_id, year, reason)
    folds: list


def _respondent_weights(keys, rows_per_key, records, activity):
    w = np.concatenate([
        np.full(n, float(records[k].outcomes[activity].respondents)) for k, n in zip(keys, rows_per_key)
    ])
    return w / w.mean()


def _sfca_fold(method, held, train, test, activity, cache, settings, monitor, inner_jobs):
    design = stack([cache.tables[r.key] for r in train])
    monitor.check(held, design.city_ids)
    labels = label_design(design, {r.key: r.outcomes[activity] for r in train}, activity, settings.grid)
    weights = None
    if method.weighted:
        keys = design.record_keys()
        by_key = {r.key: r for r in train}
        weights = _respondent_weights(keys, [design.rows_of(k).size for k in keys], by_key, activity)
    model = fit(method, design, labels.values, weights, n_jobs=inner_jobs)
    out, excluded = [], []
    for r in test:
        t = stack([cache.tables[r.key]])
        scores = np.full(settings.grid.segments_per_day, np.nan)
        scores[t.segments - 1] = np.clip(predict(model, t).scores, 0.0, 1.0)
        try:
            d = decode_times(ScoreTrace(r.city_id, r.year, activity, scores), settings.grid, activity, settings.decode)
        except NoTransitionError as e:
            excluded.append((r.city_id, r.year, str(e)))
            continue
        out.append((r, {"start": d.start_min, "stop": d.stop_min, "duration": d.duration_min}))
    return out, excluded


def _regression_fold(method, held, train, test, activity, cache, settings, monitor, inner_jobs):
    monitor.check(held, [r.city_id for r in train])
    X = np.vstack([cache.wide(r.key) for r in train])
    Xt = np.vstack([cache.wide(r.key) for r in test])
    weights = None
    if method.weighted:
        weights = np.array([float(r.outcomes[activity].respondents) for r in train])
        weights /= weights.mean()
    origin = settings.sleep_origin_min if activity == "sleep" else 0.0
    preds = {}
    for target in TARGETS:
        y = np.array([scalar_targets(r, activity, settings)[target] for r in train])
        if target != "duration":
            y = _to_origin(y, origin)
        model = fit(method, X, y, weights, feature_names=cache.wide_names, n_jobs=inner_jobs)
        p = predict(model, Xt).scores
        preds[target] = _from_origin(p, origin) if target != "duration" else p
    out = [(r, {t: float(preds[t][i]) for t in TARGETS}) for i, r in enumerate(test)]
    return out, []


def loocv_activity(
    records: Sequence[CityYearRecord],
    method: ModelSpec,
    source: str,
    activity: str,
    settings: EvalSettings = EvalSettings(),
    cache: FeatureCache | None = None,
    monitor: LeakMonitor | None = None,
) -> ActivityPredictions:
    """Hold out each city in turn (all of its years together).

    The fold seed is derived from the master seed and the held-out city id,
    so results do not depend on fold order or on ``settings.n_jobs``.
    """
    cities = sorted({r.city_id for r in records})
    if len(cities) < 3:
        raise ValueError(f"leave-one-city-out needs at least 3 cities, got {len(cities)}")
    for r in records:
        if activity not in r.outcomes:
            raise ValueError(f"record {r.key} has no {activity} outcome")
    cache = cache or FeatureCache(records, source, settings)
    monitor = monitor if monitor is not None else LeakMonitor()
    method = method.resolved()
    run_fold = _sfca_fold if method.is_classifier else _regression_fold
    fold_jobs = max(1, min(settings.n_jobs, len(cities)))

    def one(city):
        # Every fold runs to completion or failure regardless of the others,
        # so the audit trail does not depend on scheduling.
        train = [r for r in records if r.city_id != city]
        test = sorted((r for r in records if r.city_id == city), key=lambda r: r.key)
        if not train:
            return ValueError(f"fold {city}: empty training set")
        spec = replace(method, seed=stable_seed(settings.seed, method.seed or 0, city))
        try:
            return run_fold(spec, city, train, test, activity, cache, settings, monitor, 1)
        except Exception as e:  # noqa: BLE001 - re-raised below in city order
            return e

    if fold_jobs == 1:
        results = [one(c) for c in cities]
    else:
        with ThreadPoolExecutor(fold_jobs) as pool:
            results = list(pool.map(one, cities))
    for res in results:
        if isinstance(res, Exception):
            raise res

    preds = {t: [] for t in TARGETS}
    excluded = []
    for out, exc in results:
        excluded.extend(exc)
        for r, values in out:
            obs = scalar_targets(r, activity, settings)
            for t in TARGETS:
                preds[t].append(Prediction(r.city_id, r.year, float(values[t]), float(obs[t]), r.outcomes[activity].respondents))
    for t in TARGETS:
        preds[t].sort(key=lambda p: (p.city_id, p.year))
    excluded.sort()
    folds = sorted((f for f in monitor.folds), key=lambda f: f.held_out)
    return ActivityPredictions(preds, excluded, folds)


def loocv(
    records: Sequence[CityYearRecord],
    method: ModelSpec,
    problem: ProblemSpec,
    settings: EvalSettings = EvalSettings(),
    monitor: LeakMonitor | None = None,
) -> list[Prediction]:
    """Held-out predictions of one problem's target for every city-year."""
    res = loocv_activity(records, method, problem.source, problem.activity, settings, monitor=monitor)
    return res.predictions[problem.target]


@dataclass
class Cell:
    """One (method, problem, filter) result."""

    n: int
    rmse: float | None
    excluded: int = 0
    error: str | None = None


@dataclass
class EvaluationReport:
    methods: list  # (label, type) in input order
    problems: list
    thresholds: tuple
    cells: dict  # (method label, problem label, threshold) -> Cell
    predictions: dict = field(default_factory=dict)  # same key -> list[Prediction]
    folds: list = field(default_factory=list)  # FoldAudit

    def gm(self, method: str, problem: str) -> float | None:
        vals = []
        for t in self.thresholds:
            c = self.cells.get((method, problem, t))
            if c is None or c.rmse is None or not c.rmse > 0:
                return None
            vals.append(c.rmse)
        return geometric_mean(vals)

    def method_type(self, method: str) -> str:
        return dict(self.methods)[method]

    def _best(self, problem: str, types=None):
        best, best_v = None, math.inf
        for m, typ in self.methods:
            if types is not None and typ not in types:
                continue
            v = self.gm(m, problem)
            if v is not None and v < best_v:
                best, best_v = m, v
        return best

    def best_regression(self, problem: str) -> str | None:
        return self._best(problem, REGRESSION_TYPES)

    def best_overall(self, problem: str) -> str | None:
        return self._best(problem)

    def sfca_beating_regression(self, problem: str) -> list[str]:
        ref = self.best_regression(problem)
        ref_v = self.gm(ref, problem) if ref else None
        out = []
        for m, typ in self.methods:
            if typ.startswith("SFCA"):
                v = self.gm(m, problem)
                if v is not None and (ref_v is None or v < ref_v):
                    out.append(m)
        return out

    @property
    def leaked_rows(self) -> int:
        return sum(f.leaked_rows for f in self.folds)

    @property
    def failures(self) -> list:
        return [(k, c.error) for k, c in sorted(self.cells.items(), key=lambda kv: kv[0][:2] + (kv[0][2],)) if c.error]


def benchmark_matrix(
    records: Mapping[str, Sequence[CityYearRecord]],
    methods: Sequence[ModelSpec],
    problems: Sequence[ProblemSpec] | None = None,
    settings: EvalSettings = EvalSettings(),
) -> EvaluationReport:
    """Every method on every problem under every population filter.

    ``records`` maps each source to its city-year records. One LOOCV pass per
    (method, source, activity, filter) serves all three targets. A failing
    unit is recorded in its cells and the run carries on.
    """
    problems = list(problems) if problems is not None else ProblemSpec.all()
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise ValueError("method labels must be unique")
    report = EvaluationReport(
        [(m.label, m.method_type) for m in methods], problems, tuple(settings.thresholds), {}
    )
    groups = sorted({(p.source, p.activity) for p in problems})
    monitor = LeakMonitor()
    for source, activity in groups:
        if source not in records:
            raise ValueError(f"no records for source {source!r}")
        cache = FeatureCache(records[source], source, settings)
        targets = [p for p in problems if (p.source, p.activity) == (source, activity)]
        for method, threshold in itertools.product(methods, settings.thresholds):
            keys = [(method.label, p.label, threshold) for p in targets]
            try:
                subset = population_filter(records[source], threshold)
                res = loocv_activity(subset, method, source, activity, settings, cache, monitor)
            except LeakError:
                raise
            except Exception as e:  # noqa: BLE001 - recorded per cell by design
                msg = f"{type(e).__name__}: {e}"
                log.warning("%s %s/%s >%g failed: %s", method.label, source, activity, threshold, msg)
                for k in keys:
                    report.cells[k] = Cell(0, None, 0, msg)
                continue
            n = len({(r.city_id, r.year) for r in subset})
            for p, k in zip(targets, keys):
                preds = res.predictions[p.target]
                value = (
                    rmse([q.predicted for q in preds], [q.observed for q in preds], p.circular)
                    if preds else None
                )
                err = None if preds else "every city-year failed to decode"
                report.cells[k] = Cell(n, value, len(res.excluded), err)
                report.predictions[k] = preds
            if res.excluded:
                log.info("%s %s/%s >%g: %d decode exclusions", method.label, source, activity,
                         threshold, len(res.excluded))
    report.folds = sorted(monitor.folds, key=lambda f: (f.held_out, f.train_rows))
    return report


EVALUATION_FORMAT = "sfca-evaluation"


def report_to_dict(report: EvaluationReport) -> dict:
    """JSON-ready form of a report, with cells and predictions in a fixed order."""

    def key(k):
        return [k[0], k[1], k[2]]

    order = sorted(report.cells, key=lambda k: (k[0], k[1], k[2]))
    return {
        "format": EVALUATION_FORMAT,
        "version": 1,
        "methods": [list(m) for m in report.methods],
        "problems": [p.label for p in report.problems],
        "thresholds": list(report.thresholds),
        "cells": [
            key(k) + [c.n, c.rmse, c.excluded, c.error] for k, c in ((k, report.cells[k]) for k in order)
        ],
        "predictions": [
            key(k) + [[[q.city_id, q.year, q.predicted, q.observed, q.respondents] for q in report.predictions[k]]]
            for k in order if k in report.predictions
        ],
        "folds": [[f.held_out, f.train_rows, f.leaked_rows] for f in report.folds],
    }


def report_from_dict(doc: dict) -> EvaluationReport:
    if doc.get("format") != EVALUATION_FORMAT:
        raise ValueError("not an evaluation file")
    if doc.get("version") != 1:
        raise ValueError(f"unsupported evaluation file version {doc.get('version')}")
    cells = {(m, p, t): Cell(n, r, e, err) for m, p, t, n, r, e, err in doc["cells"]}
    preds = {
        (m, p, t): [Prediction(c, int(y), float(a), float(b), int(n)) for c, y, a, b, n in rows]
        for m, p, t, rows in doc["predictions"]
    }
    folds = [FoldAudit(h, (), n, leak) for h, n, leak in doc["folds"]]
    return EvaluationReport(
        [tuple(m) for m in doc["methods"]],
        [ProblemSpec.parse(p) for p in doc["problems"]],
        tuple(doc["thresholds"]), cells, preds, folds,
    )
