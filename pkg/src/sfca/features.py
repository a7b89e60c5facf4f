"""Derivative predictor features built from a synthetic week."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DOW_NAMES
from .trajectory import CityYearRecord
from .wavelets import wavelet_compress

SOURCES = ("internet", "electricity")
PER_SEGMENT_KINDS = ("level", "diff1", "diff2", "peak_dummy", "trough_dummy")
STATIC_KINDS = ("wavelet_static", "scalar_static")
DROPPED_SEGMENTS = 2


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    kind: str
    dow: int | None = None


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature layout for one data source."""

    source: str
    segments_per_day: int
    descriptors: tuple[FeatureDescriptor, ...]
    wavelet: str = "sym3"
    wavelet_level: int = 7

    def __post_init__(self):
        names = [d.name for d in self.descriptors]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        for d in self.descriptors:
            if d.kind not in PER_SEGMENT_KINDS + STATIC_KINDS:
                raise ValueError(f"unknown feature kind {d.kind!r}")

    @property
    def segment_features(self) -> list[FeatureDescriptor]:
        return [d for d in self.descriptors if d.kind in PER_SEGMENT_KINDS]

    @property
    def static_features(self) -> list[FeatureDescriptor]:
        return [d for d in self.descriptors if d.kind in STATIC_KINDS]

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.segment_features + self.static_features]

    @property
    def usable_segments(self) -> int:
        return self.segments_per_day - DROPPED_SEGMENTS

    @classmethod
    def for_source(
        cls,
        source: str,
        segments_per_day: int = 96,
        include_latitude: bool | None = None,
        wavelet: str = "sym3",
        wavelet_level: int | None = None,
    ) -> "FeatureSchema":
        """Default layout: 5 per-segment kinds x 7 weekdays plus statics.

        Internet data carry 10 weekly wavelet coefficients (sym3, level 7 on
        the 672-long week) and latitude; electricity data carry 6 wavelet
        coefficients per weekday (sym3, level 6 on each 96-long day), with
        latitude off unless requested.
        """
        if source not in SOURCES:
            raise ValueError(f"unknown source {source!r}")
        desc = [
            FeatureDescriptor(f"{kind}_{DOW_NAMES[k - 1]}", kind, k)
            for kind in PER_SEGMENT_KINDS
            for k in range(1, 8)
        ]
        if source == "internet":
            level = 7 if wavelet_level is None else wavelet_level
            n = wavelet_compress(np.zeros(7 * segments_per_day), wavelet, level).size
            desc += [FeatureDescriptor(f"wav_{i + 1:02d}", "wavelet_static") for i in range(n)]
            lat = True if include_latitude is None else include_latitude
        else:
            level = 6 if wavelet_level is None else wavelet_level
            n = wavelet_compress(np.zeros(segments_per_day), wavelet, level).size
            desc += [
                FeatureDescriptor(f"wav_{DOW_NAMES[k - 1]}_{i + 1}", "wavelet_static", k)
                for k in range(1, 8)
                for i in range(n)
            ]
            lat = False if include_latitude is None else include_latitude
        if lat:
            desc.append(FeatureDescriptor("abs_latitude", "scalar_static"))
        return cls(source, segments_per_day, tuple(desc), wavelet, level)


@dataclass
class FeatureTable:
    """Per-segment block (usable segments x features) plus static vector."""

    city_id: str
    year: int
    segments: np.ndarray
    block: np.ndarray
    statics: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        if self.block.shape != (self.schema.usable_segments, len(self.schema.segment_features)):
            raise ValueError(f"feature block has shape {self.block.shape}")
        if self.statics.shape != (len(self.schema.static_features),):
            raise ValueError(f"static vector has shape {self.statics.shape}")
        if not (np.all(np.isfinite(self.block)) and np.all(np.isfinite(self.statics))):
            raise ValueError("feature table contains non-finite entries")

    @property
    def key(self) -> tuple[str, int]:
        return (self.city_id, self.year)

    def wide(self) -> np.ndarray:
        """Flattened row for untransformed regression: block then statics."""
        return np.concatenate([self.block.T.ravel(), self.statics])


def first_difference(values) -> np.ndarray:
    """``d[s] = v[s] - v[s-1]``; the head entry is NaN (dropped)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least 2 values to difference")
    out = np.empty_like(v)
    out[0] = np.nan
    out[1:] = np.diff(v)
    return out


def second_difference(values) -> np.ndarray:
    """Difference of the first difference; two leading NaNs."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise ValueError("need at least 3 values for a second difference")
    return first_difference(first_difference(v))


def peak_trough_dummies(values) -> tuple[np.ndarray, np.ndarray]:
    """Indicator vectors of the (earliest) maximum and minimum."""
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("peak/trough dummies need a complete trace")
    peak = np.zeros(v.size)
    trough = np.zeros(v.size)
    peak[np.argmax(v)] = 1.0
    trough[np.argmin(v)] = 1.0
    return peak, trough


def _wavelet_statics(record: CityYearRecord, schema: FeatureSchema) -> np.ndarray:
    week = record.week.traces
    if schema.source == "internet":
        return wavelet_compress(week.ravel(), schema.wavelet, schema.wavelet_level)
    return np.concatenate(
        [wavelet_compress(day, schema.wavelet, schema.wavelet_level) for day in week]
    )


def assemble_features(
    record: CityYearRecord, schema: FeatureSchema, source: str | None = None
) -> FeatureTable:
    """Build the feature table of one city-year."""
    if source is not None and source != schema.source:
        raise ValueError(f"schema is for {schema.source!r} data, not {source!r}")
    week = record.week.traces
    if week.shape[1] != schema.segments_per_day:
        raise ValueError(
            f"week has {week.shape[1]} segments per day, schema expects "
            f"{schema.segments_per_day}"
        )
    per_kind = {kind: [] for kind in PER_SEGMENT_KINDS}
    for day in week:
        peak, trough = peak_trough_dummies(day)
        per_kind["level"].append(day)
        per_kind["diff1"].append(first_difference(day))
        per_kind["diff2"].append(second_difference(day))
        per_kind["peak_dummy"].append(peak)
        per_kind["trough_dummy"].append(trough)
    cols = [per_kind[d.kind][d.dow - 1] for d in schema.segment_features]
    block = np.column_stack(cols)[DROPPED_SEGMENTS:]

    wav = _wavelet_statics(record, schema)
    statics = []
    wav_iter = iter(wav)
    for d in schema.static_features:
        if d.kind == "wavelet_static":
            statics.append(next(wav_iter))
        elif d.name == "abs_latitude":
            if "latitude" not in record.static_features:
                raise ValueError(f"record {record.key} has no latitude")
            statics.append(abs(record.static_features["latitude"]))
        else:
            statics.append(record.static_features[d.name])
    segments = np.arange(DROPPED_SEGMENTS + 1, schema.segments_per_day + 1)
    return FeatureTable(
        record.city_id, record.year, segments, block, np.asarray(statics, dtype=float), schema
    )
