import numpy as np
import pytest
from hypothesis import given, strategies as st

from sfca.grid import SegmentGrid


def test_default_grid_midpoints():
    g = SegmentGrid()
    assert g.segments[0] == 1 and g.segments[-1] == 96
    assert g.midpoints[0] == 7.5
    assert g.midpoints[-1] == 1432.5


@pytest.mark.parametrize("spd,mins", [(96, 14), (0, 15), (48, 15)])
def test_grid_rejects_partial_days(spd, mins):
    with pytest.raises(ValueError):
        SegmentGrid(spd, mins)


def test_grid_rejects_bad_offset():
    with pytest.raises(ValueError):
        SegmentGrid(day_start_offset=97)


@given(st.floats(min_value=-5000, max_value=5000, allow_nan=False))
def test_segment_of_contains_minute(minute):
    g = SegmentGrid()
    s = g.segment_of(minute)
    m = minute % 1440
    m = 0.0 if m >= 1440 else m
    assert 1 <= s <= 96
    assert g.starts[s - 1] <= m < g.starts[s - 1] + 15 + 1e-9


def test_shifted_wraps():
    g = SegmentGrid(day_start_offset=95)
    assert g.shifted(3).day_start_offset == 2
    assert g.shifted(-94).day_start_offset == 1


def test_tiny_negative_minute_is_first_segment():
    assert SegmentGrid().segment_of(-1e-300) == 1
