import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sfca.grid import SegmentGrid
from sfca.pipeline import _contiguous_runs, electricity_weeks
from sfca.trajectory import (
    ActivityOutcome,
    DailyTrace,
    aggregate_online_fraction,
    build_synthetic_week,
    downscale_hourly,
    normalize_unit_interval,
    register_dow_average,
)


@given(arrays(float, 96, elements=st.floats(-1e3, 1e3)))
def test_normalize_spans_unit_interval(v):
    out = normalize_unit_interval(DailyTrace("c", v)).values
    if np.ptp(v) > 0:
        assert out.min() == 0 and out.max() == 1
        # affine and increasing: sorting by input leaves the output non-decreasing
        assert np.all(np.diff(out[np.argsort(v)]) >= 0)
    else:
        assert np.all(out == 0.5)


def test_normalize_keeps_missing():
    v = np.array([1.0, np.nan, 3.0])
    out = normalize_unit_interval(DailyTrace("c", v)).values
    assert out[0] == 0 and np.isnan(out[1]) and out[2] == 1


def test_aggregate_counts_by_hand():
    scans = [("a", 0.0, True), ("a", 5.0, False), ("a", 14.9, True), ("a", 15.0, False), ("b", 30.0, True)]
    out = aggregate_online_fraction(scans)
    assert out["a"].values[0] == pytest.approx(2 / 3)
    assert out["a"].values[1] == 0.0
    assert np.isnan(out["a"].values[2])
    assert out["b"].values[2] == 1.0


def test_aggregate_rejects_out_of_day():
    with pytest.raises(ValueError):
        aggregate_online_fraction([("a", 1440.0, True)])


@given(st.floats(-1e4, 1e4), st.integers(1, 3))
def test_downscale_constant(c, days):
    out = downscale_hourly(np.full(24 * days, c))
    assert out.shape == (96 * days,)
    assert np.allclose(out, c, atol=1e-8 * max(1, abs(c)))


def test_downscale_ramp_is_exact():
    hours = np.arange(24) * 60 + 30
    y = 2.0 + 0.01 * hours
    out = downscale_hourly(y)
    assert np.allclose(out, 2.0 + 0.01 * SegmentGrid().midpoints)


def test_downscale_rejects_partial_day():
    with pytest.raises(ValueError):
        downscale_hourly(np.zeros(23))


def _week_days(values_by_dow, city="c", year=2010):
    return [DailyTrace(city, v, dow, None, year) for dow, v in values_by_dow]


def test_register_average_normalizes_each_weekday():
    rng = np.random.default_rng(3)
    days = _week_days([(d, rng.normal(size=96) * d + 5) for d in range(1, 8) for _ in range(2)])
    wk = register_dow_average(days)
    assert wk.traces.shape == (7, 96)
    assert np.allclose(wk.traces.min(axis=1), 0) and np.allclose(wk.traces.max(axis=1), 1)


def test_week_needs_every_weekday():
    days = _week_days([(d, np.zeros(96)) for d in range(1, 7)])
    with pytest.raises(ValueError, match="Sun"):
        build_synthetic_week(days)


def test_unsmoothed_week_is_dow_mean():
    days = _week_days([(d, np.full(96, float(d + r))) for d in range(1, 8) for r in (0, 2)])
    wk = build_synthetic_week(days, smooth=False)
    assert np.allclose(wk.traces[:, 0], np.arange(1, 8) + 1.0)


def test_week_smoothing_fills_missing_segments():
    rng = np.random.default_rng(4)
    days = []
    for d in range(1, 8):
        v = rng.uniform(size=96)
        v[40:44] = np.nan
        days.append(DailyTrace("c", v, d, None, 2010))
    wk = build_synthetic_week(days)
    assert np.all(np.isfinite(wk.traces))


@pytest.mark.parametrize("kw", [
    dict(activity="nap", start_min=1, stop_min=2),
    dict(activity="work", start_min=600, stop_min=500),
    dict(activity="sleep", start_min=300, stop_min=400),
    dict(activity="sleep", start_min=1440, stop_min=400),
])
def test_outcome_validation(kw):
    with pytest.raises(ValueError):
        ActivityOutcome(**kw)


def test_sleep_duration_wraps():
    assert ActivityOutcome("sleep", 1380, 420).duration_min == 480


def test_contiguous_runs_split_at_gaps():
    items = [("2010-01-04",), ("2010-01-05",), ("2010-01-07",), ("2010-01-08",)]
    assert [len(r) for r in _contiguous_runs(items)] == [2, 2]


def test_electricity_constant_demand_gives_flat_week():
    import datetime as dt

    rows = []
    d0 = dt.date(2010, 1, 4)
    for i in range(14):
        d = d0 + dt.timedelta(days=i)
        rows.append(("c", 2010, d.isoformat(), d.isoweekday(), np.full(24, 100.0)))
    wk = electricity_weeks(rows)[("c", 2010)]
    assert np.allclose(wk.traces, 0.5)


@given(st.lists(st.tuples(st.sampled_from("ab"), st.floats(0, 1439.999), st.booleans()), max_size=60))
def test_online_fraction_in_unit_interval(scans):
    for trace in aggregate_online_fraction(scans).values():
        obs = trace.values[np.isfinite(trace.values)]
        assert np.all((obs >= 0) & (obs <= 1))


@given(arrays(float, 96, elements=st.floats(-100, 100)), st.floats(0.01, 100), st.floats(-100, 100))
def test_normalize_idempotent_and_affine_invariant(v, a, b):
    once = normalize_unit_interval(DailyTrace("c", v)).values
    twice = normalize_unit_interval(DailyTrace("c", once)).values
    assert np.allclose(once, twice, atol=1e-12)
    if np.ptp(v) > 1e-6:
        moved = normalize_unit_interval(DailyTrace("c", a * v + b)).values
        assert np.allclose(moved, once, atol=1e-9)
