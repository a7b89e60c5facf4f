"""The discretised time-of-day domain shared by predictors and outcomes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MINUTES_PER_DAY = 1440
DOW_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


@dataclass(frozen=True)
class SegmentGrid:
    """Equal segments covering one day.

    Segments are 1-based. Segment ``s`` spans minutes
    ``[(s-1)*segment_minutes, s*segment_minutes)`` and is represented by its
    midpoint. ``day_start_offset`` is the segment treated as the first one
    when scores are rotated for decoding.
    """

    segments_per_day: int = 96
    segment_minutes: int = 15
    day_start_offset: int = 64

    def __post_init__(self):
        if self.segments_per_day < 1 or self.segment_minutes < 1:
            raise ValueError("segment counts must be positive")
        if self.segments_per_day * self.segment_minutes != MINUTES_PER_DAY:
            raise ValueError(
                f"segments_per_day * segment_minutes must be {MINUTES_PER_DAY}, "
                f"got {self.segments_per_day} * {self.segment_minutes}"
            )
        if not 1 <= self.day_start_offset <= self.segments_per_day:
            raise ValueError("day_start_offset must lie in 1..segments_per_day")

    @property
    def segments(self) -> np.ndarray:
        return np.arange(1, self.segments_per_day + 1)

    @property
    def starts(self) -> np.ndarray:
        """Start minute of every segment."""
        return (self.segments - 1) * float(self.segment_minutes)

    @property
    def midpoints(self) -> np.ndarray:
        """Representative time (minutes after midnight) of every segment."""
        return self.starts + self.segment_minutes / 2.0

    def segment_of(self, minute: float) -> int:
        """1-based segment containing ``minute`` (taken modulo one day)."""
        m = minute % MINUTES_PER_DAY
        if m >= MINUTES_PER_DAY:  # a tiny negative minute rounds up to a full day
            m = 0.0
        return int(m // self.segment_minutes) + 1

    def shifted(self, k: int) -> "SegmentGrid":
        """Grid whose decoding offset is moved forward by ``k`` segments."""
        off = (self.day_start_offset - 1 + k) % self.segments_per_day + 1
        return SegmentGrid(self.segments_per_day, self.segment_minutes, off)
