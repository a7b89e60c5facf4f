import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfca.decode import (
    DecodeSettings,
    DecodedTimes,
    NoTransitionError,
    ScoreTrace,
    decode_times,
    duration,
    ideal_score_trace,
)
from sfca.grid import SegmentGrid
from sfca.trajectory import ActivityOutcome
from sfca.transform import threshold_labels


def _ideal(activity, start, stop):
    return ideal_score_trace(threshold_labels(ActivityOutcome(activity, start, stop), drop=0),
                             activity=activity)


def _circ(a, b):
    return abs((a - b + 720) % 1440 - 720)


@settings(max_examples=25)
@given(st.integers(-20, 20))
def test_rotation_equivariance(k):
    """Rolling the scores and the decoding frame by k segments shifts the answer by 15k."""
    base = _ideal("sleep", 1335, 407)
    grid = SegmentGrid()
    t0 = decode_times(base, grid)
    rolled = ScoreTrace("x", 0, "sleep", np.roll(base.scores, k))
    g2 = grid.shifted(k)
    s2 = DecodeSettings(sleep_split_min=180.0 + 15 * k)
    t1 = decode_times(rolled, g2, settings=s2)
    assert _circ(t1.start_min, t0.start_min + 15 * k) < 1e-6
    assert _circ(t1.stop_min, t0.stop_min + 15 * k) < 1e-6


@pytest.mark.parametrize("start,stop", [(540, 1020), (480, 960), (615, 1125)])
def test_work_step_decodes_within_half_segment(start, stop):
    t = decode_times(_ideal("work", start, stop))
    assert abs(t.start_min - start) <= 7.5 and abs(t.stop_min - stop) <= 7.5


def test_audit_sign_pattern():
    t, a = decode_times(_ideal("sleep", 1335, 407), audit=True)
    # rise before the split, fall after it
    assert a.denoised[np.argmax(a.denoised)] > 0 and a.denoised[np.argmin(a.denoised)] < 0
    assert a.boundary_minutes[np.argmax(a.denoised)] < a.boundary_minutes[np.argmin(a.denoised)]
    assert a.start_min % 1440 == pytest.approx(t.start_min)


def test_noise_does_not_move_a_clean_edge_far():
    rng = np.random.default_rng(0)
    base = _ideal("work", 540, 1020)
    noisy = np.clip(base.scores + rng.normal(0, 0.05, 96), 0, 1)
    t = decode_times(ScoreTrace("x", 0, "work", noisy))
    assert abs(t.start_min - 540) < 20 and abs(t.stop_min - 1020) < 20


def test_flat_trace_raises():
    with pytest.raises(NoTransitionError):
        decode_times(ScoreTrace("x", 0, "sleep", np.full(96, 0.4)))


def test_too_few_scores_raise():
    s = np.full(96, np.nan)
    s[:50] = 0.5
    with pytest.raises(ValueError):
        decode_times(ScoreTrace("x", 0, "sleep", s))


def test_scores_outside_unit_interval_rejected():
    with pytest.raises(ValueError):
        ScoreTrace("x", 0, "sleep", np.full(96, 1.5))


def test_duration_conventions():
    assert duration(DecodedTimes("sleep", 1380, 420)) == 480
    assert duration(DecodedTimes("work", 540, 1020)) == 480


def test_soft_denoise_option():
    t = decode_times(_ideal("work", 540, 1020), settings=DecodeSettings(denoise="soft"))
    assert abs(t.start_min - 540) <= 15


# work windows must straddle the noon split: rise before it, fall after it
windows = st.tuples(st.integers(30, 47), st.integers(50, 80))


@settings(max_examples=30)
@given(windows)
def test_step_family_decodes_inside_support(w):
    """Work steps: times sit within one segment of the scored window's edges."""
    a, b = w  # first and last segment of the window
    s = np.zeros(96)
    s[a - 1:b] = 1
    t = decode_times(ScoreTrace("x", 0, "work", s))
    lo, hi = (a - 1) * 15, b * 15
    assert lo - 15 <= t.start_min <= lo + 15
    assert hi - 15 <= t.stop_min <= hi + 15


@settings(max_examples=30)
@given(st.integers(85, 95), st.integers(20, 35))
def test_denoise_keeps_sign_pattern_on_sleep_steps(onset, wake):
    s = np.zeros(96)
    s[:wake] = 1
    s[onset - 1:] = 1
    _, a = decode_times(ScoreTrace("x", 0, "sleep", s), audit=True)
    for raw_idx in (np.argmax(a.difference), np.argmin(a.difference)):
        sign = np.sign(a.difference[raw_idx])
        assert np.sign(a.denoised[raw_idx]) == sign
    assert np.argmax(a.denoised) == np.argmax(a.difference)
    assert np.argmin(a.denoised) == np.argmin(a.difference)
