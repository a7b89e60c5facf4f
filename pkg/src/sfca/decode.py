"""Turn per-segment activity scores back into continuous start/stop times."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import MINUTES_PER_DAY, SegmentGrid
from .smoothing import garcia_smooth
from .wavelets import denoise_finest, soft_denoise_finest


class NoTransitionError(ValueError):
    def __init__(self, detail: str = ""):
        super().__init__("no transition found" + (f": {detail}" if detail else ""))


@dataclass
class DecodeSettings:
    penalty: float = 0.06
    wavelet: str = "sym8"
    denoise: str = "zero"  # or "soft"
    sleep_split_min: float = 180.0
    work_split_min: float = 720.0
    work_day_start_offset: int = 1
    resolution_min: float = 1.0
    min_scores: int = 90
    flat_tol: float = 1e-6

    def __post_init__(self):
        if self.denoise not in ("zero", "soft"):
            raise ValueError("denoise must be 'zero' or 'soft'")


@dataclass
class ScoreTrace:
    """Class-1 scores on the unshifted grid; NaN marks unscored segments."""

    city_id: str
    year: int
    activity: str
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        obs = self.scores[np.isfinite(self.scores)]
        if obs.size and (obs.min() < 0 or obs.max() > 1):
            raise ValueError("scores must lie in [0, 1]")


@dataclass(frozen=True)
class DecodedTimes:
    activity: str
    start_min: float
    stop_min: float

    def __post_init__(self):
        for v in (self.start_min, self.stop_min):
            if not 0 <= v < MINUTES_PER_DAY:
                raise ValueError(f"decoded time {v} outside [0, 1440)")

    @property
    def duration_min(self) -> float:
        return duration(self, self.activity)


def duration(times: DecodedTimes, activity: str | None = None) -> float:
    """Sleep wraps past midnight; work is a plain difference."""
    activity = activity or times.activity
    if activity == "sleep":
        return (times.stop_min - times.start_min) % MINUTES_PER_DAY
    return times.stop_min - times.start_min


@dataclass
class DecodeAudit:
    """Intermediate signals on the rotated axis (minutes are unwrapped)."""

    segment_minutes: np.ndarray  # midpoint of each rotated segment
    raw: np.ndarray
    smoothed: np.ndarray
    boundary_minutes: np.ndarray  # location of each difference
    difference: np.ndarray
    denoised: np.ndarray
    start_min: float
    stop_min: float


def _extremum(x, values, find_max: bool) -> int:
    target = values.max() if find_max else values.min()
    hits = np.flatnonzero(values == target)
    centre = (x[0] + x[-1]) / 2.0
    return int(hits[np.argmin(np.abs(x[hits] - centre))])


def _section_extremum(b, d, lo, hi, find_max, resolution, flat_tol):
    sel = (b >= lo) & (b < hi)
    if sel.sum() < 2:
        raise NoTransitionError("section too short")
    bs, ds = b[sel], d[sel]
    fine = np.arange(bs[0], bs[-1] + 1e-9, resolution)
    vals = CubicSpline(bs, ds)(fine) if bs.size >= 4 else np.interp(fine, bs, ds)
    k = _extremum(fine, vals, find_max)
    if (vals[k] if find_max else -vals[k]) <= flat_tol:
        raise NoTransitionError("no edge of the expected sign")
    return float(fine[k])


def decode_times(
    trace: ScoreTrace,
    grid: SegmentGrid = SegmentGrid(),
    activity: str | None = None,
    settings: DecodeSettings = DecodeSettings(),
    audit: bool = False,
):
    """Decode start and stop times from one city-year's score trace.

    The trace is rotated so the day begins at the decoding offset (the grid's
    ``day_start_offset`` for sleep, ``settings.work_day_start_offset`` for
    work), rescaled to [0, 1], lightly smoothed (which also fills unscored
    segments), differenced and de-noised at the finest wavelet scale. The
    rotated day is split at the activity's split time; a cubic spline at
    ``resolution_min`` locates the largest rise before the split (start) and
    the deepest fall after it (stop).

    Returns :class:`DecodedTimes`, or ``(DecodedTimes, DecodeAudit)`` when
    ``audit`` is true.
    """
    activity = activity or trace.activity
    S = grid.segments_per_day
    scores = np.asarray(trace.scores, dtype=float)
    if scores.size != S:
        raise ValueError(f"score trace has {scores.size} entries, grid has {S}")
    observed = np.isfinite(scores)
    if observed.sum() < settings.min_scores:
        raise ValueError(
            f"only {observed.sum()} usable scores, need {settings.min_scores}"
        )
    if activity == "sleep":
        offset, split = grid.day_start_offset, settings.sleep_split_min
    elif activity == "work":
        offset, split = settings.work_day_start_offset, settings.work_split_min
    else:
        raise ValueError(f"unknown activity {activity!r}")

    rot = np.roll(scores, -(offset - 1))
    axis_start = (offset - 1) * grid.segment_minutes
    mids = axis_start + np.arange(S) * grid.segment_minutes + grid.segment_minutes / 2.0

    obs = rot[np.isfinite(rot)]
    lo, hi = obs.min(), obs.max()
    if hi - lo <= settings.flat_tol:
        raise NoTransitionError("flat score trace")
    scaled = (rot - lo) / (hi - lo)
    smoothed = garcia_smooth(scaled, settings.penalty)
    diff = np.diff(smoothed)
    bounds = mids[1:] - grid.segment_minutes / 2.0
    if settings.denoise == "zero":
        den = denoise_finest(diff, settings.wavelet)
    else:
        den = soft_denoise_finest(diff, settings.wavelet)
    if np.max(np.abs(den)) <= settings.flat_tol:
        raise NoTransitionError("flat difference signal")

    split_u = axis_start + (split - axis_start) % MINUTES_PER_DAY
    start_u = _section_extremum(
        bounds, den, -np.inf, split_u, True, settings.resolution_min, settings.flat_tol
    )
    stop_u = _section_extremum(
        bounds, den, split_u, np.inf, False, settings.resolution_min, settings.flat_tol
    )
    times = DecodedTimes(activity, start_u % MINUTES_PER_DAY, stop_u % MINUTES_PER_DAY)
    if not audit:
        return times
    return times, DecodeAudit(mids, rot, smoothed, bounds, diff, den, start_u, stop_u)


def ideal_score_trace(labels, city_id="ideal", year=0, activity="sleep", missing=(1, 2)) -> ScoreTrace:
    """A 0/1 score trace from full-day labels, with the given segments unscored."""
    s = np.asarray(labels, dtype=float).copy()
    for seg in missing:
        s[seg - 1] = np.nan
    return ScoreTrace(city_id, year, activity, s)
