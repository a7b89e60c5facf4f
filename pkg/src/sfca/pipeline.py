"""Raw observations to feature-ready city-year records."""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .grid import SegmentGrid
from .trajectory import (
    HOURLY_SMOOTH_PENALTY,
    WEEK_SMOOTH_PENALTY,
    ActivityOutcome,
    CityYearRecord,
    DailyTrace,
    SyntheticWeek,
    build_synthetic_week,
    downscale_hourly,
    normalize_unit_interval,
    register_dow_average,
)


@dataclass
class PreprocessSettings:
    week_penalty: float = WEEK_SMOOTH_PENALTY
    robust: bool = True
    hourly_penalty: float = HOURLY_SMOOTH_PENALTY


def _group(items, key):
    out = defaultdict(list)
    for it in items:
        out[key(it)].append(it)
    return out


def internet_weeks(
    days: Iterable[DailyTrace], settings: PreprocessSettings = PreprocessSettings()
) -> dict[tuple[str, int], SyntheticWeek]:
    """Normalize each raw day, then average and smooth per weekday."""
    groups = _group(days, lambda d: (d.city_id, d.year))
    weeks = {}
    for key in sorted(groups):
        normed = [normalize_unit_interval(d) for d in groups[key]]
        weeks[key] = build_synthetic_week(normed, settings.week_penalty, settings.robust)
    return weeks


def _contiguous_runs(items):
    """Split date-sorted ``(date, ...)`` items wherever a calendar day is skipped."""
    runs, prev = [], None
    for it in items:
        d = dt.date.fromisoformat(it[0]) if it[0] else None
        if prev is None or d is None or (d - prev).days != 1:
            runs.append([])
        runs[-1].append(it)
        prev = d
    return runs


def electricity_weeks(
    hourly: Iterable[tuple],
    grid: SegmentGrid = SegmentGrid(),
    settings: PreprocessSettings = PreprocessSettings(),
) -> dict[tuple[str, int], SyntheticWeek]:
    """Down-scale, average per weekday and register hourly demand.

    ``hourly`` yields ``(city_id, year, date, dow, 24 MW values)`` per day.
    Runs of consecutive dates are down-scaled together.
    """
    groups = _group(hourly, lambda h: (h[0], h[1]))
    weeks = {}
    for key in sorted(groups):
        rows = sorted(groups[key], key=lambda h: h[2] or "")
        days = []
        for run in _contiguous_runs([(h[2], h[3], h[4]) for h in rows]):
            fine = downscale_hourly(np.concatenate([r[2] for r in run]), grid, settings.hourly_penalty)
            for i, (date, dow, _) in enumerate(run):
                seg = fine[i * grid.segments_per_day:(i + 1) * grid.segments_per_day]
                days.append(DailyTrace(key[0], seg, dow, date, key[1]))
        weeks[key] = register_dow_average(days)
    return weeks


def build_records(
    weeks: Mapping[tuple[str, int], SyntheticWeek],
    outcomes: Mapping[tuple[str, int], Mapping[str, ActivityOutcome]],
    latitudes: Mapping[str, float],
) -> list[CityYearRecord]:
    """Join weeks with outcomes and static features, sorted by key."""
    records = []
    for key in sorted(weeks):
        statics = {}
        if key[0] in latitudes:
            statics["latitude"] = float(latitudes[key[0]])
        records.append(
            CityYearRecord(key[0], key[1], weeks[key], statics, dict(outcomes.get(key, {})))
        )
    return records


def records_from_corpus(corpus, source: str, grid: SegmentGrid = SegmentGrid(),
                        settings: PreprocessSettings = PreprocessSettings()) -> list[CityYearRecord]:
    """Records for one data source straight from generated city data."""
    if source == "internet":
        weeks = internet_weeks((d for c in corpus for d in c.days), settings)
    elif source == "electricity":
        weeks = electricity_weeks(
            ((c.params.city_id, c.year, date, dow, mw) for c in corpus for date, dow, mw in c.demand),
            grid, settings,
        )
    else:
        raise ValueError(f"unknown source {source!r}")
    outcomes = {(c.params.city_id, c.year): c.outcomes for c in corpus}
    lats = {c.params.city_id: c.params.latitude for c in corpus}
    return build_records(weeks, outcomes, lats)
