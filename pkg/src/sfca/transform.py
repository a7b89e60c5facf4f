"""Wide-to-tall stacking and outcome thresholding."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .features import DROPPED_SEGMENTS, FeatureTable
from .grid import SegmentGrid
from .trajectory import ActivityOutcome

log = logging.getLogger(__name__)

BALANCE_RANGE = (0.1, 0.9)


@dataclass
class InclusionResult:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def check_inclusion(
    outcomes: Iterable[tuple[object, float]], grid: SegmentGrid = SegmentGrid()
) -> InclusionResult:
    """Check that every outcome time lies in the day covered by ``grid``.

    ``outcomes`` is an iterable of ``(label, minutes)`` pairs; each violation
    names its label.
    """
    span = grid.segments_per_day * grid.segment_minutes
    res = InclusionResult()
    for label, value in outcomes:
        if not (np.isfinite(value) and 0 <= value < span):
            res.violations.append(f"{label}: {value} outside [0, {span})")
    return res


def outcome_times(key, outcome: ActivityOutcome) -> list[tuple[str, float]]:
    return [
        (f"{key}:{outcome.activity}:start", outcome.start_min),
        (f"{key}:{outcome.activity}:stop", outcome.stop_min),
    ]


@dataclass
class StackedDesign:
    """Tall design matrix with ``(city_id, year, segment)`` row provenance."""

    city_ids: np.ndarray
    years: np.ndarray
    segments: np.ndarray
    matrix: np.ndarray
    columns: list[str]

    def __post_init__(self):
        n = self.matrix.shape[0]
        if not (len(self.city_ids) == len(self.years) == len(self.segments) == n):
            raise ValueError("provenance and matrix rows disagree")
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.columns):
            raise ValueError("matrix width does not match column names")

    def __len__(self):
        return self.matrix.shape[0]

    def record_keys(self) -> list[tuple[str, int]]:
        """Distinct ``(city_id, year)`` keys in row order."""
        seen = {}
        for c, y in zip(self.city_ids, self.years):
            seen.setdefault((c, int(y)), None)
        return list(seen)

    def rows_of(self, key) -> np.ndarray:
        c, y = key
        return np.flatnonzero((self.city_ids == c) & (self.years == y))


def stack_arrays(wide: np.ndarray) -> np.ndarray:
    """Stack an ``(N, M, S)`` array of trajectories into an ``(N*S, M)`` one.

    Each observation's ``1 x S`` row of dimension ``m`` becomes column ``m`` of
    an ``S x M`` block; blocks are concatenated observation by observation.
    """
    wide = np.asarray(wide)
    if wide.ndim != 3:
        raise ValueError("expected an (observations, dimensions, segments) array")
    n, m, s = wide.shape
    return wide.transpose(0, 2, 1).reshape(n * s, m)


def unstack_arrays(tall: np.ndarray, n_segments: int) -> np.ndarray:
    """Inverse of :func:`stack_arrays`."""
    tall = np.asarray(tall)
    ns, m = tall.shape
    if ns % n_segments:
        raise ValueError("row count is not a multiple of the segment count")
    return tall.reshape(ns // n_segments, n_segments, m).transpose(0, 2, 1)


def stack(tables: Sequence[FeatureTable]) -> StackedDesign:
    """Stack feature tables; static features are repeated on every row."""
    if not tables:
        return StackedDesign(
            np.array([], dtype=object), np.array([], dtype=int), np.array([], dtype=int),
            np.empty((0, 0)), [],
        )
    schema = tables[0].schema
    for t in tables[1:]:
        if t.schema != schema:
            raise ValueError(f"record {t.key} uses a different feature schema")
    blocks, cities, years, segs = [], [], [], []
    for t in tables:
        rows = t.block.shape[0]
        blocks.append(np.hstack([t.block, np.broadcast_to(t.statics, (rows, t.statics.size))]))
        cities.append(np.full(rows, t.city_id, dtype=object))
        years.append(np.full(rows, t.year))
        segs.append(t.segments)
    return StackedDesign(
        np.concatenate(cities), np.concatenate(years), np.concatenate(segs),
        np.vstack(blocks), list(schema.names),
    )


def unstack(design: StackedDesign, schema) -> list[FeatureTable]:
    """Recover the feature tables from a stacked design."""
    n_seg = len(schema.segment_features)
    out = []
    for key in design.record_keys():
        rows = design.rows_of(key)
        m = design.matrix[rows]
        out.append(
            FeatureTable(key[0], key[1], design.segments[rows].copy(), m[:, :n_seg].copy(),
                         m[0, n_seg:].copy(), schema)
        )
    return out


def threshold_scalar(y: float, times) -> np.ndarray:
    """Binary rule ``1 where t_s <= y`` over explicit segment times."""
    return np.asarray(times, dtype=float) <= y


def threshold_labels(
    outcome: ActivityOutcome, grid: SegmentGrid = SegmentGrid(), drop: int = DROPPED_SEGMENTS
) -> np.ndarray:
    """Boolean activity indicator at each segment midpoint.

    Sleep is 1 where ``t <= stop`` or ``t >= start`` (the window wraps past
    midnight); work is 1 where ``start <= t <= stop``. The first ``drop``
    segments are omitted so labels align with differenced features.
    """
    if outcome.start_min == outcome.stop_min:
        raise ValueError("zero-width activity")
    inc = check_inclusion([("start", outcome.start_min), ("stop", outcome.stop_min)], grid)
    if not inc:
        raise ValueError("; ".join(inc.violations))
    t = grid.midpoints
    if outcome.activity == "sleep":
        lab = (t <= outcome.stop_min) | (t >= outcome.start_min)
    else:
        lab = (t >= outcome.start_min) & (t <= outcome.stop_min)
    return lab[drop:]


@dataclass
class LabelVector:
    activity: str
    values: np.ndarray
    city_ids: np.ndarray
    years: np.ndarray

    def __len__(self):
        return self.values.size


def label_design(
    design: StackedDesign,
    outcomes: dict[tuple[str, int], ActivityOutcome],
    activity: str,
    grid: SegmentGrid = SegmentGrid(),
) -> LabelVector:
    """Labels aligned row-for-row with ``design``."""
    full = {}
    y = np.zeros(len(design), dtype=bool)
    for key in design.record_keys():
        if key not in outcomes:
            raise KeyError(f"no {activity} outcome for {key}")
        if key not in full:
            full[key] = threshold_labels(outcomes[key], grid, drop=0)
        rows = design.rows_of(key)
        y[rows] = full[key][design.segments[rows] - 1]
    return LabelVector(activity, y, design.city_ids, design.years)


@dataclass
class BalanceReport:
    fractions: dict[tuple[str, int], float]
    warnings: list[str]


def balance_report(labels: LabelVector, bounds=BALANCE_RANGE) -> BalanceReport:
    """Class-1 fraction per record, warning outside ``bounds``."""
    fractions, warnings = {}, []
    keys = {}
    for c, y in zip(labels.city_ids, labels.years):
        keys.setdefault((c, int(y)), None)
    for key in keys:
        mask = (labels.city_ids == key[0]) & (labels.years == key[1])
        frac = float(labels.values[mask].mean())
        fractions[key] = frac
        if not bounds[0] <= frac <= bounds[1]:
            msg = f"{key}: class-1 fraction {frac:.3f} outside [{bounds[0]}, {bounds[1]}]"
            warnings.append(msg)
            log.warning(msg)
    return BalanceReport(fractions, warnings)


def single_record_labels(values, activity: str, key=("record", 0)) -> LabelVector:
    """Wrap a bare label array as a one-record :class:`LabelVector`."""
    v = np.asarray(values, dtype=bool)
    return LabelVector(activity, v, np.full(v.size, key[0], dtype=object), np.full(v.size, key[1]))

