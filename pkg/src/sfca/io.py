"""CSV readers and writers for every file the pipeline consumes or emits.

Floats are written with ``repr`` so that a write followed by a read gives
back the same values bit for bit. An empty value cell means "missing".
"""

from __future__ import annotations

import csv
import datetime as dt
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .decode import DecodeAudit
from .features import FeatureTable
from .trajectory import ActivityOutcome, DailyTrace, SyntheticWeek
from .transform import StackedDesign

TRACE_HEADER = ["city_id", "year", "date", "dow", "segment", "value"]
DEMAND_HEADER = ["city_id", "year", "date", "hour", "megawatts"]
OUTCOME_HEADER = ["city_id", "year", "activity", "start_min", "stop_min", "respondents", "population"]
STATIC_HEADER = ["city_id", "latitude"]
WEEK_HEADER = ["city_id", "year", "dow", "segment", "value"]
FEATURE_KEYS = ["city_id", "year", "segment"]
AUDIT_HEADER = ["stage", "minute", "value"]
AUDIT_STAGES = ("raw", "smoothed", "difference", "denoised", "extrema")


class FormatError(ValueError):
    pass


def _num(x) -> str:
    x = float(x)
    return "" if np.isnan(x) else repr(x)


def _float(s: str) -> float:
    return float("nan") if s == "" else float(s)


def _writer(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def _rows(path, header: list[str] | None = None, prefix: list[str] | None = None):
    """Yield row dicts after checking the header (exact, or by prefix)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if header is not None and head != header:
            raise FormatError(f"{path}: expected header {','.join(header)}, got {','.join(head)}")
        if prefix is not None and head[: len(prefix)] != prefix:
            raise FormatError(f"{path}: header must start with {','.join(prefix)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(head):
                raise FormatError(f"{path}:{lineno}: expected {len(head)} fields, got {len(row)}")
            yield lineno, head, row


# ---------------------------------------------------------------- traces


def write_traces(path, days: Iterable[DailyTrace]) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(TRACE_HEADER)
        for d in days:
            for s, v in enumerate(d.values, start=1):
                w.writerow([d.city_id, d.year, d.date or "", d.dow, s, _num(v)])


def read_traces(path, segments_per_day: int = 96) -> list[DailyTrace]:
    """Daily traces in file order of first appearance."""
    acc: dict = {}
    for lineno, _, (city, year, date, dow, seg, value) in _rows(path, TRACE_HEADER):
        key = (city, int(year), date, int(dow))
        if not 1 <= key[3] <= 7:
            raise FormatError(f"{path}:{lineno}: dow must be 1..7")
        vals = acc.setdefault(key, np.full(segments_per_day, np.nan))
        s = int(seg)
        if not 1 <= s <= segments_per_day:
            raise FormatError(f"{path}:{lineno}: segment {s} outside 1..{segments_per_day}")
        vals[s - 1] = _float(value)
    return [DailyTrace(c, v, dow, date or None, y) for (c, y, date, dow), v in acc.items()]


# ---------------------------------------------------------------- demand


def write_demand(path, rows: Iterable[tuple]) -> None:
    """``rows`` yields ``(city_id, year, date, dow, 24 hourly MW)``."""
    fh, w = _writer(path)
    with fh:
        w.writerow(DEMAND_HEADER)
        for city, year, date, _, mw in rows:
            for h, v in enumerate(mw):
                w.writerow([city, year, date, h, _num(v)])


def read_demand(path) -> list[tuple]:
    """``(city_id, year, date, dow, 24 MW values)`` per day; dow from the date."""
    acc: dict = {}
    for lineno, _, (city, year, date, hour, mw) in _rows(path, DEMAND_HEADER):
        h = int(hour)
        if not 0 <= h <= 23:
            raise FormatError(f"{path}:{lineno}: hour must be 0..23")
        acc.setdefault((city, int(year), date), np.full(24, np.nan))[h] = _float(mw)
    out = []
    for (city, year, date), mw in acc.items():
        if np.isnan(mw).any():
            raise FormatError(f"{path}: {city} {date} is missing hours")
        out.append((city, year, date, dt.date.fromisoformat(date).isoweekday(), mw))
    return out


# -------------------------------------------------------------- outcomes


def write_outcomes(path, outcomes: Mapping[tuple[str, int], Mapping[str, ActivityOutcome]]) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(OUTCOME_HEADER)
        for (city, year) in sorted(outcomes):
            for act in sorted(outcomes[(city, year)]):
                o = outcomes[(city, year)][act]
                w.writerow([city, year, act, _num(o.start_min), _num(o.stop_min), o.respondents, o.population])


def read_outcomes(path) -> dict[tuple[str, int], dict[str, ActivityOutcome]]:
    out: dict = defaultdict(dict)
    for lineno, _, (city, year, act, start, stop, resp, pop) in _rows(path, OUTCOME_HEADER):
        try:
            o = ActivityOutcome(act, float(start), float(stop), int(resp), int(pop))
        except ValueError as e:
            raise FormatError(f"{path}:{lineno}: {e}") from None
        key = (city, int(year))
        if act in out[key]:
            raise FormatError(f"{path}:{lineno}: duplicate {act} outcome for {city} {year}")
        out[key][act] = o
    return dict(out)


# ---------------------------------------------------------------- static


def write_static(path, latitudes: Mapping[str, float]) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(STATIC_HEADER)
        for city in sorted(latitudes):
            w.writerow([city, _num(latitudes[city])])


def read_static(path) -> dict[str, float]:
    return {city: float(lat) for _, _, (city, lat) in _rows(path, STATIC_HEADER)}


# ----------------------------------------------------------------- weeks


def write_weeks(path, weeks: Mapping[tuple[str, int], SyntheticWeek | np.ndarray]) -> None:
    """Seven-day traces per city-year; also used for the generator's clean curves."""
    fh, w = _writer(path)
    with fh:
        w.writerow(WEEK_HEADER)
        for (city, year) in sorted(weeks):
            wk = weeks[(city, year)]
            traces = wk.traces if isinstance(wk, SyntheticWeek) else np.asarray(wk)
            for d, day in enumerate(traces, start=1):
                for s, v in enumerate(day, start=1):
                    w.writerow([city, year, d, s, _num(v)])


def read_weeks(path, segments_per_day: int = 96) -> dict[tuple[str, int], SyntheticWeek]:
    acc: dict = {}
    for lineno, _, (city, year, dow, seg, value) in _rows(path, WEEK_HEADER):
        arr = acc.setdefault((city, int(year)), np.full((7, segments_per_day), np.nan))
        d, s = int(dow), int(seg)
        if not (1 <= d <= 7 and 1 <= s <= segments_per_day):
            raise FormatError(f"{path}:{lineno}: dow/segment out of range")
        arr[d - 1, s - 1] = _float(value)
    out = {}
    for (city, year), arr in acc.items():
        if np.isnan(arr).any():
            raise FormatError(f"{path}: incomplete week for {city} {year}")
        out[(city, year)] = SyntheticWeek(city, year, arr)
    return out


# --------------------------------------------------- features and designs


def write_features(path, tables: Iterable[FeatureTable]) -> None:
    """Per-segment rows with static features repeated on each row."""
    from .transform import stack

    write_design(path, stack(list(tables)))


def write_design(path, design: StackedDesign, labels=None) -> None:
    fh, w = _writer(path)
    with fh:
        head = FEATURE_KEYS + (["label"] if labels is not None else []) + list(design.columns)
        w.writerow(head)
        for i in range(len(design)):
            row = [design.city_ids[i], int(design.years[i]), int(design.segments[i])]
            if labels is not None:
                row.append(int(bool(labels[i])))
            row.extend(_num(v) for v in design.matrix[i])
            w.writerow(row)


def read_design(path):
    """``(StackedDesign, labels or None)``; a ``label`` column is optional."""
    cities, years, segs, labels, mat = [], [], [], [], []
    columns = None
    has_label = False
    for _, head, row in _rows(path, prefix=FEATURE_KEYS):
        if columns is None:
            has_label = len(head) > 3 and head[3] == "label"
            columns = head[4:] if has_label else head[3:]
        cities.append(row[0])
        years.append(int(row[1]))
        segs.append(int(row[2]))
        if has_label:
            labels.append(row[3] == "1")
        mat.append([_float(v) for v in row[(4 if has_label else 3):]])
    if columns is None:
        with open(path, newline="", encoding="utf-8") as fh:
            head = next(csv.reader(fh))
        has_label = len(head) > 3 and head[3] == "label"
        columns = head[4:] if has_label else head[3:]
    design = StackedDesign(
        np.array(cities, dtype=object), np.array(years, dtype=int), np.array(segs, dtype=int),
        np.array(mat, dtype=float).reshape(len(mat), len(columns)), list(columns),
    )
    return design, (np.array(labels, dtype=bool) if has_label else None)


read_features = read_design


# ----------------------------------------------------------- decode audit


def write_decode_audit(path, audit: DecodeAudit) -> None:
    """Long-form dump of every decode stage (minutes on the rotated axis)."""
    fh, w = _writer(path)
    with fh:
        w.writerow(AUDIT_HEADER)
        for m, v in zip(audit.segment_minutes, audit.raw):
            w.writerow(["raw", _num(m), _num(v)])
        for m, v in zip(audit.segment_minutes, audit.smoothed):
            w.writerow(["smoothed", _num(m), _num(v)])
        for m, v in zip(audit.boundary_minutes, audit.difference):
            w.writerow(["difference", _num(m), _num(v)])
        for m, v in zip(audit.boundary_minutes, audit.denoised):
            w.writerow(["denoised", _num(m), _num(v)])
        w.writerow(["extrema", _num(audit.start_min), "1"])
        w.writerow(["extrema", _num(audit.stop_min), "-1"])


def read_decode_audit(path) -> dict[str, np.ndarray]:
    """Stage name to an ``(n, 2)`` array of ``(minute, value)`` pairs."""
    acc: dict = {s: [] for s in AUDIT_STAGES}
    for lineno, _, (stage, minute, value) in _rows(path, AUDIT_HEADER):
        if stage not in acc:
            raise FormatError(f"{path}:{lineno}: unknown stage {stage!r}")
        acc[stage].append((_float(minute), _float(value)))
    return {s: np.array(v, dtype=float).reshape(-1, 2) for s, v in acc.items()}
