"""Predictor trajectories: online-fraction aggregation, registration and
synthetic-week construction, hourly down-scaling."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import DOW_NAMES, MINUTES_PER_DAY, SegmentGrid
from .smoothing import garcia_smooth

WEEK_SMOOTH_PENALTY = 500.0
HOURLY_SMOOTH_PENALTY = 1.0


ACTIVITIES = ("sleep", "work")

@dataclass
class DailyTrace:
    """One day of per-segment values; NaN marks a missing segment."""

    city_id: str
    values: np.ndarray
    dow: int | None = None  # 1 = Monday
    date: str | None = None
    year: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.dow is not None and not 1 <= self.dow <= 7:
            raise ValueError(f"dow must be in 1..7, got {self.dow}")

    def with_values(self, values) -> "DailyTrace":
        return DailyTrace(self.city_id, values, self.dow, self.date, self.year)


@dataclass
class SyntheticWeek:
    """Seven smoothed, registered day traces (rows Mon..Sun)."""

    city_id: str
    year: int
    traces: np.ndarray

    def __post_init__(self):
        self.traces = np.asarray(self.traces, dtype=float)
        if self.traces.ndim != 2 or self.traces.shape[0] != 7:
            raise ValueError("a synthetic week needs exactly 7 day traces")
        if not np.all(np.isfinite(self.traces)):
            raise ValueError("synthetic week contains non-finite values")

    @property
    def segments_per_day(self) -> int:
        return self.traces.shape[1]

    def wide(self) -> np.ndarray:
        """The contiguous Mon..Sun trace (length 7 * segments_per_day)."""
        return self.traces.ravel()


@dataclass(frozen=True)
class ActivityOutcome:
    """Average start/stop of an activity, in minutes after midnight.

    ``start_min`` is the 0->1 transition into the activity and ``stop_min`` the
    1->0 transition out of it; for sleep the window wraps past midnight.
    """

    activity: str
    start_min: float
    stop_min: float
    respondents: int = 1
    population: int = 1

    def __post_init__(self):
        if self.activity not in ACTIVITIES:
            raise ValueError(f"unknown activity {self.activity!r}")
        for v in (self.start_min, self.stop_min):
            if not 0 <= v < MINUTES_PER_DAY:
                raise ValueError(f"outcome time {v} outside [0, 1440)")
        if self.start_min == self.stop_min:
            raise ValueError("zero-width activity")
        if self.activity == "work" and not self.start_min < self.stop_min:
            raise ValueError("work must start before it stops")
        if self.activity == "sleep" and not self.stop_min < self.start_min:
            raise ValueError("sleep must wrap past midnight (stop < start)")
        if self.respondents < 1 or self.population < 1:
            raise ValueError("respondents and population must be positive")

    @property
    def duration_min(self) -> float:
        return (self.stop_min - self.start_min) % MINUTES_PER_DAY


@dataclass
class CityYearRecord:
    city_id: str
    year: int
    week: SyntheticWeek
    static_features: dict[str, float] = field(default_factory=dict)
    outcomes: dict[str, ActivityOutcome] = field(default_factory=dict)

    @property
    def key(self) -> tuple[str, int]:
        return (self.city_id, self.year)

    @property
    def population(self) -> int | None:
        pops = [o.population for o in self.outcomes.values()]
        return max(pops) if pops else None

    @property
    def respondents(self) -> int:
        resp = [o.respondents for o in self.outcomes.values()]
        return max(resp) if resp else 1


def aggregate_online_fraction(
    records: Iterable[tuple[str, float, bool]], grid: SegmentGrid = SegmentGrid()
) -> dict[str, DailyTrace]:
    """Online fraction per segment from ``(city_id, minute, online)`` scans.

    All timestamps are taken to belong to one calendar day. Segments without
    any scan are NaN.
    """
    on = defaultdict(lambda: np.zeros(grid.segments_per_day))
    total = defaultdict(lambda: np.zeros(grid.segments_per_day))
    for city_id, minute, online in records:
        if not 0 <= minute < MINUTES_PER_DAY:
            raise ValueError(f"timestamp {minute} outside one day")
        s = int(minute // grid.segment_minutes)
        total[city_id][s] += 1
        if online:
            on[city_id][s] += 1
    out = {}
    for city_id in sorted(total):
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(total[city_id] > 0, on[city_id] / total[city_id], np.nan)
        out[city_id] = DailyTrace(city_id, frac)
    return out


def normalize_unit_interval(trace: DailyTrace) -> DailyTrace:
    """Affine map of the observed values onto [0, 1]; flat traces become 0.5."""
    v = trace.values
    obs = np.isfinite(v)
    if not obs.any():
        raise ValueError("empty trace")
    lo, hi = v[obs].min(), v[obs].max()
    out = np.full_like(v, np.nan)
    if hi > lo:
        out[obs] = (v[obs] - lo) / (hi - lo)
    else:
        out[obs] = 0.5
    return trace.with_values(out)


def _dow_means(days: Iterable[DailyTrace]) -> tuple[str, int, np.ndarray]:
    by_dow = defaultdict(list)
    city_ids, years = set(), set()
    for d in days:
        if d.dow is None:
            raise ValueError("every trace needs a day-of-week tag")
        by_dow[d.dow].append(d.values)
        city_ids.add(d.city_id)
        years.add(d.year)
    missing = [DOW_NAMES[k - 1] for k in range(1, 8) if k not in by_dow]
    if missing:
        raise ValueError(f"no traces for day(s) of week: {', '.join(missing)}")
    if len(city_ids) != 1 or len(years) != 1:
        raise ValueError("traces must come from a single city-year")
    lengths = {v.size for vals in by_dow.values() for v in vals}
    if len(lengths) != 1:
        raise ValueError("traces differ in length")
    means = []
    for k in range(1, 8):
        stack = np.vstack(by_dow[k])
        cnt = np.isfinite(stack).sum(axis=0)
        tot = np.nansum(stack, axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            means.append(np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan))
    year = years.pop()
    return city_ids.pop(), (0 if year is None else year), np.vstack(means)


def smooth_week_days(means: np.ndarray, penalty: float, robust: bool = True,
                     context: int | None = None) -> np.ndarray:
    """Smooth each weekday of a (7, S) array within its cyclic neighbours.

    Day ``k`` is smoothed on the window ``[tail of day k-1, day k, head of
    day k+1]`` (Sunday wraps to Monday) and cropped back, so an edge close to
    midnight is not distorted by a mirrored day boundary. ``context`` is the
    number of neighbouring segments on each side (default: a full day);
    ``context=0`` smooths every day in isolation.
    """
    n_seg = means.shape[1]
    ctx = n_seg if context is None else int(context)
    out = np.empty_like(means)
    for k in range(7):
        prev_day = means[(k - 1) % 7]
        next_day = means[(k + 1) % 7]
        window = np.concatenate([prev_day[n_seg - ctx:], means[k], next_day[:ctx]])
        out[k] = garcia_smooth(window, penalty, robust=robust)[ctx:ctx + n_seg]
    return out


def build_synthetic_week(
    days: Iterable[DailyTrace],
    penalty: float = WEEK_SMOOTH_PENALTY,
    robust: bool = True,
    smooth: bool = True,
    context: int | None = None,
) -> SyntheticWeek:
    """Average normalized days per weekday, then smooth each weekday.

    See :func:`smooth_week_days` for the boundary handling.
    """
    city_id, year, means = _dow_means(days)
    if smooth:
        means = smooth_week_days(means, penalty, robust, context)
    elif not np.all(np.isfinite(means)):
        raise ValueError("unsmoothed week has missing segments")
    return SyntheticWeek(city_id, year, means)


def downscale_hourly(
    series_24, grid: SegmentGrid = SegmentGrid(), penalty: float = HOURLY_SMOOTH_PENALTY
) -> np.ndarray:
    """Light smoothing of hourly values, then a cubic spline onto the grid.

    Hourly samples sit at hour midpoints. The spline is natural and
    extrapolates linearly past the first and last midpoints. The smoother acts
    on the residual about the least-squares line, so constants and straight
    lines pass through unchanged.

    The input may hold several consecutive days (a multiple of 24 values);
    down-scaling them together lets each day's edges see the neighbouring
    days instead of an extrapolated boundary. The output has
    ``segments_per_day`` values per input day.
    """
    y = np.asarray(series_24, dtype=float).ravel()
    if y.size == 0 or y.size % 24:
        raise ValueError(f"expected a multiple of 24 hourly values, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ValueError("hourly series contains non-finite values")
    n_days = y.size // 24
    hours = np.arange(y.size) * 60.0 + 30.0
    if penalty > 0:
        slope, intercept = np.polyfit(hours, y, 1)
        trend = slope * hours + intercept
        y = trend + garcia_smooth(y - trend, penalty)
    spline = CubicSpline(hours, y, bc_type="natural", extrapolate=True)
    at = (np.arange(n_days)[:, None] * MINUTES_PER_DAY + grid.midpoints[None, :]).ravel()
    return spline(at)


def register_dow_average(days: Iterable[DailyTrace]) -> SyntheticWeek:
    """Average per weekday over the year, then normalize each weekday to [0, 1]."""
    city_id, year, means = _dow_means(days)
    if not np.all(np.isfinite(means)):
        raise ValueError("demand traces contain missing segments")
    rows = [normalize_unit_interval(DailyTrace(city_id, m)).values for m in means]
    return SyntheticWeek(city_id, year, np.vstack(rows))
