"""Run configuration: a flat ``section.key = value`` TOML file.

Every key has a default, so an empty file (or no file) is a valid
configuration. Unknown sections and keys are rejected, as are values of the
wrong type. Model hyperparameters use three-part keys such as
``model.c-tree-bag.n_trees = 100``.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

from .decode import DecodeSettings
from .evaluation import EvalSettings, ProblemSpec
from .grid import SegmentGrid
from .learners import FAMILIES, ModelSpec
from .pipeline import PreprocessSettings
from .synth import FILTER_THRESHOLDS


class ConfigError(ValueError):
    pass


@dataclass
class GridSection:
    segments_per_day: int = 96
    segment_minutes: int = 15
    day_start_offset: int = 64


@dataclass
class SmoothingSection:
    week_penalty: float = 500.0
    robust: bool = True
    hourly_penalty: float = 1.0


@dataclass
class FeaturesSection:
    internet_latitude: bool = True
    electricity_latitude: bool = False


@dataclass
class DecodeSection:
    penalty: float = 0.06
    wavelet: str = "sym8"
    denoise: str = "zero"
    sleep_split_min: float = 180.0
    work_split_min: float = 720.0
    work_day_start_offset: int = 1
    resolution_min: float = 1.0


@dataclass
class EvaluateSection:
    methods: list = field(default_factory=lambda: [
        "ols", "ridge", "lasso", "r-tree", "r-tree(bg)", "r-tree(bs)",
        "c-tree(bg)", "c-tree(bs)", "c-tree(bg)(w)", "logr(ridge)", "logr(lasso)", "svm",
    ])
    problems: list = field(default_factory=lambda: [p.label for p in ProblemSpec.all()])
    thresholds: list = field(default_factory=lambda: list(FILTER_THRESHOLDS))
    n_jobs: int = 1
    sleep_origin_min: float = 720.0


@dataclass
class SynthSection:
    cities: int = 60
    days: int = 28
    noise_sigma: float = 0.03
    steepness: float = 0.1
    noise: str = "gaussian"
    years: list = field(default_factory=lambda: [2010])


@dataclass
class ReportSection:
    formats: list = field(default_factory=lambda: ["svg"])
    ci_sd_min: float = 60.0
    scatter_filter: int = 0


@dataclass
class PathsSection:
    data: str = "data"
    out: str = "out"


_MODEL_KEYS = {
    "lam": float, "n_trees": int, "max_depth": int, "min_leaf": int,
    "learning_rate": float, "subsample": float, "mtry": int,
}

_SECTIONS = {
    "grid": GridSection, "smoothing": SmoothingSection, "features": FeaturesSection,
    "decode": DecodeSection, "evaluate": EvaluateSection, "synth": SynthSection,
    "report": ReportSection, "paths": PathsSection,
}


@dataclass
class RunConfig:
    seed: int = 0
    grid: GridSection = field(default_factory=GridSection)
    smoothing: SmoothingSection = field(default_factory=SmoothingSection)
    features: FeaturesSection = field(default_factory=FeaturesSection)
    decode: DecodeSection = field(default_factory=DecodeSection)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)
    synth: SynthSection = field(default_factory=SynthSection)
    report: ReportSection = field(default_factory=ReportSection)
    paths: PathsSection = field(default_factory=PathsSection)
    model: dict = field(default_factory=dict)  # family -> {param: value}

    # Derived views -------------------------------------------------------

    def segment_grid(self) -> SegmentGrid:
        return SegmentGrid(**dataclasses.asdict(self.grid))

    def preprocess_settings(self) -> PreprocessSettings:
        s = self.smoothing
        return PreprocessSettings(s.week_penalty, s.robust, s.hourly_penalty)

    def decode_settings(self) -> DecodeSettings:
        return DecodeSettings(**dataclasses.asdict(self.decode))

    def eval_settings(self, n_jobs: int | None = None) -> EvalSettings:
        e = self.evaluate
        return EvalSettings(
            grid=self.segment_grid(),
            decode=self.decode_settings(),
            thresholds=tuple(e.thresholds),
            seed=self.seed,
            n_jobs=e.n_jobs if n_jobs is None else n_jobs,
            include_latitude={
                "internet": self.features.internet_latitude,
                "electricity": self.features.electricity_latitude,
            },
            sleep_origin_min=e.sleep_origin_min,
        )

    def model_spec(self, label: str) -> ModelSpec:
        spec = ModelSpec.from_label(label, seed=self.seed)
        return dataclasses.replace(spec, **self.model.get(spec.family, {}))

    def model_specs(self) -> list[ModelSpec]:
        return [self.model_spec(m) for m in self.evaluate.methods]

    def problems(self) -> list[ProblemSpec]:
        return [ProblemSpec.parse(p) for p in self.evaluate.problems]


def _check_type(key: str, value: Any, expected) -> Any:
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is bool and not isinstance(value, bool):
        raise ConfigError(f"{key}: expected true/false, got {value!r}")
    if expected is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if expected in (float, str, list) and not isinstance(value, expected):
        raise ConfigError(f"{key}: expected {expected.__name__}, got {value!r}")
    return value


def _field_types(cls) -> dict:
    hints = {"int": int, "float": float, "bool": bool, "str": str, "list": list}
    return {f.name: hints[f.type] for f in fields(cls)}


def from_mapping(doc: dict) -> RunConfig:
    """Validate a parsed document and build the configuration."""
    cfg = RunConfig()
    for top, value in doc.items():
        if top == "seed":
            cfg.seed = _check_type("seed", value, int)
        elif top in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{top}: expected a section of keys")
            types = _field_types(_SECTIONS[top])
            section = getattr(cfg, top)
            for key, v in value.items():
                if key not in types:
                    raise ConfigError(f"unknown config key {top}.{key}")
                setattr(section, key, _check_type(f"{top}.{key}", v, types[key]))
        elif top == "model":
            if not isinstance(value, dict):
                raise ConfigError("model: expected model.<family>.<param> keys")
            for fam, params in value.items():
                if fam not in FAMILIES:
                    raise ConfigError(f"unknown model family model.{fam}")
                if not isinstance(params, dict):
                    raise ConfigError(f"model.{fam}: expected model.{fam}.<param> keys")
                for key, v in params.items():
                    if key not in _MODEL_KEYS:
                        raise ConfigError(f"unknown config key model.{fam}.{key}")
                    cfg.model.setdefault(fam, {})[key] = _check_type(f"model.{fam}.{key}", v, _MODEL_KEYS[key])
        else:
            raise ConfigError(f"unknown config key {top}")
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    try:
        cfg.segment_grid()
        cfg.decode_settings()
        cfg.model_specs()
        cfg.problems()
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None
    if cfg.evaluate.n_jobs < 1:
        raise ConfigError("evaluate.n_jobs must be >= 1")
    if not cfg.evaluate.thresholds:
        raise ConfigError("evaluate.thresholds must not be empty")
    if cfg.synth.noise not in ("gaussian", "burst"):
        raise ConfigError("synth.noise must be 'gaussian' or 'burst'")
    if cfg.synth.cities < 3 or cfg.synth.days < 7:
        raise ConfigError("synth needs at least 3 cities and 7 days")
    if cfg.synth.noise_sigma < 0:
        raise ConfigError("synth.noise_sigma must be >= 0")
    bad = set(cfg.report.formats) - {"svg", "png"}
    if bad:
        raise ConfigError(f"report.formats: unsupported {sorted(bad)}")


def load_config(path: str | Path | None = None) -> RunConfig:
    """Read a configuration file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return from_mapping(doc)


def dump_config(cfg: RunConfig) -> str:
    """Render every key as ``section.key = value`` lines (re-loadable)."""

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, list):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        return repr(v)

    lines = [f"seed = {cfg.seed}"]
    for name in _SECTIONS:
        for k, v in dataclasses.asdict(getattr(cfg, name)).items():
            lines.append(f"{name}.{k} = {fmt(v)}")
    for fam in sorted(cfg.model):
        for k, v in sorted(cfg.model[fam].items()):
            lines.append(f"model.{fam}.{k} = {fmt(v)}")
    return "\n".join(lines) + "\n"
