"""Unified fit/predict layer over the regression and classification families."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from types import MappingProxyType

import numpy as np

from . import ensembles, linear
from .linear import ConvergenceError, SingularSystemWarning, sigmoid, standardize
from .trees import TreeArrays

__all__ = [
    "FAMILIES", "ModelSpec", "FittedModel", "PredictionScores", "fit", "predict",
    "save_model", "load_model", "standardize", "ConvergenceError", "SingularSystemWarning",
]

MODEL_FORMAT = "sfca-model"
MODEL_FORMAT_VERSION = 1

# family -> (display label, method type, task)
FAMILIES = {
    "ols": ("ols", "REG", "regression"),
    "ridge": ("ridge", "pREG", "regression"),
    "lasso": ("lasso", "pREG", "regression"),
    "r-tree": ("r-tree", "REG-T", "regression"),
    "r-tree-bag": ("r-tree(bg)", "REG-T", "regression"),
    "r-tree-boost": ("r-tree(bs)", "REG-T", "regression"),
    "c-tree-bag": ("c-tree(bg)", "SFCA-T", "classification"),
    "c-tree-boost": ("c-tree(bs)", "SFCA-T", "classification"),
    "logr-ridge": ("logr(ridge)", "SFCA-pREG", "classification"),
    "logr-lasso": ("logr(lasso)", "SFCA-pREG", "classification"),
    "svm-linear": ("svm", "SFCA-SVM", "classification"),
}

_DEFAULTS = {
    "ridge": {"lam": 1.0},
    "lasso": {"lam": 1.0},
    "logr-ridge": {"lam": 0.01},
    "logr-lasso": {"lam": 0.001},
    "svm-linear": {"lam": 1e-3},
    "r-tree": {"max_depth": None, "min_leaf": 5},
    "r-tree-bag": {"n_trees": 200, "max_depth": None, "min_leaf": 5},
    "c-tree-bag": {"n_trees": 200, "max_depth": None, "min_leaf": 1},
    "r-tree-boost": {"n_trees": 300, "max_depth": 4, "min_leaf": 5, "learning_rate": 0.1, "subsample": 0.8},
    "c-tree-boost": {"n_trees": 300, "max_depth": 4, "min_leaf": 5, "learning_rate": 0.1, "subsample": 0.8},
}


@dataclass(frozen=True)
class ModelSpec:
    """A learner family plus hyperparameters; unset values take family defaults."""

    family: str
    lam: float | None = None
    n_trees: int | None = None
    max_depth: int | None = None
    min_leaf: int | None = None
    learning_rate: float | None = None
    subsample: float | None = None
    mtry: int | None = None
    weighted: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.n_trees is not None and self.n_trees < 1:
            raise ValueError("tree count must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max depth must be >= 1")
        if self.min_leaf is not None and self.min_leaf < 1:
            raise ValueError("min leaf size must be >= 1")
        if self.learning_rate is not None and not 0 < self.learning_rate <= 1:
            raise ValueError("learning rate must lie in (0, 1]")
        if self.subsample is not None and not 0 < self.subsample <= 1:
            raise ValueError("subsample fraction must lie in (0, 1]")

    def resolved(self) -> "ModelSpec":
        """Copy with family defaults filled in."""
        updates = {k: v for k, v in _DEFAULTS.get(self.family, {}).items() if getattr(self, k) is None}
        return replace(self, **updates)

    @property
    def label(self) -> str:
        return FAMILIES[self.family][0] + ("(w)" if self.weighted else "")

    @property
    def method_type(self) -> str:
        return FAMILIES[self.family][1]

    @property
    def is_classifier(self) -> bool:
        return FAMILIES[self.family][2] == "classification"

    @classmethod
    def from_label(cls, label: str, **kw) -> "ModelSpec":
        """Parse a display label such as ``c-tree(bg)(w)`` or a family id."""
        weighted = label.endswith("(w)")
        base = label[:-3] if weighted else label
        for fam, (lab, _, _) in FAMILIES.items():
            if base in (fam, lab):
                return cls(fam, weighted=weighted, **kw)
        raise ValueError(f"unknown method {label!r}")


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    feature_names: tuple[str, ...]
    params: MappingProxyType
    meta: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    @property
    def family(self) -> str:
        return self.spec.family


@dataclass
class PredictionScores:
    scores: np.ndarray
    city_ids: np.ndarray | None = None
    years: np.ndarray | None = None
    segments: np.ndarray | None = None


def _freeze(params: dict) -> MappingProxyType:
    out = {}
    for k, v in params.items():
        if isinstance(v, np.ndarray):
            v = v.copy()
            v.setflags(write=False)
        out[k] = v
    return MappingProxyType(out)


def _as_matrix(design):
    if hasattr(design, "matrix"):
        return np.asarray(design.matrix, dtype=float), list(design.columns)
    return np.asarray(design, dtype=float), None


def fit(spec: ModelSpec, design, target, weights=None, feature_names=None, n_jobs: int = 1) -> FittedModel:
    """Train ``spec`` on a design matrix (array or stacked design).

    Classification families take boolean (0/1) targets. ``weights`` are
    per-row positive reals, rescaled internally to mean 1.
    """
    X, names = _as_matrix(design)
    if names is None:
        names = feature_names if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
    y = np.asarray(target, dtype=float).ravel()
    n = X.shape[0]
    if y.size != n:
        raise ValueError(f"design has {n} rows but target has {y.size}")
    if X.ndim != 2 or n == 0:
        raise ValueError("design must be a non-empty 2-D matrix")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design and target must be finite")
    w = linear._weights(weights, n)
    spec = spec.resolved()
    fam = spec.family
    if spec.is_classifier and not np.all((y == 0) | (y == 1)):
        raise ValueError("classification targets must be boolean")

    params: dict = {}
    meta: dict = {}
    if fam == "ols":
        params["coef"], params["intercept"] = linear.fit_ols(X, y, w)
    elif fam == "ridge":
        params["coef"], params["intercept"] = linear.fit_ridge(X, y, spec.lam, w)
    elif fam == "lasso":
        params["coef"], params["intercept"], info = linear.fit_lasso(X, y, spec.lam, w)
        meta["sweeps"] = info["sweeps"]
    elif fam == "logr-ridge":
        params["coef"], params["intercept"] = linear.fit_logistic_ridge(X, y, spec.lam, w)
    elif fam == "logr-lasso":
        params["coef"], params["intercept"] = linear.fit_logistic_lasso(X, y, spec.lam, w)
    elif fam == "svm-linear":
        coef, b, a, c = linear.fit_linear_svm(X, y, spec.lam, w)
        params.update(coef=coef, intercept=b, platt_slope=a, platt_offset=c)
    elif fam == "r-tree":
        trees = ensembles.fit_single_tree(X, y, w, spec.max_depth, spec.min_leaf, spec.seed)
        params.update(trees.as_dict())
    elif fam in ("r-tree-bag", "c-tree-bag"):
        trees, counts = ensembles.fit_bagging(
            X, y, w, spec.n_trees, spec.max_depth, spec.min_leaf, spec.mtry,
            classification=spec.is_classifier, seed=spec.seed, n_jobs=n_jobs,
        )
        params.update(trees.as_dict())
        meta["bootstrap_counts"] = counts
    elif fam in ("r-tree-boost", "c-tree-boost"):
        trees, init, losses = ensembles.fit_boosting(
            X, y, w, spec.n_trees, spec.max_depth, spec.min_leaf, spec.learning_rate,
            spec.subsample, classification=spec.is_classifier, seed=spec.seed,
        )
        params.update(trees.as_dict())
        params["init"] = init
        meta["train_loss"] = losses
    for k in ("intercept",):
        if k in params:
            params[k] = float(params[k])
    return FittedModel(spec, tuple(names), _freeze(params), _freeze(meta))


def _trees(params) -> TreeArrays:
    return TreeArrays(*(params[k] for k in ("feature", "threshold", "left", "right", "value", "roots")))


def predict(model: FittedModel, design) -> PredictionScores:
    """Deterministic scores; classifiers return class-1 scores in [0, 1]."""
    X, names = _as_matrix(design)
    if names is not None and tuple(names) != model.feature_names:
        raise ValueError("design columns do not match the model's training features")
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise ValueError(
            f"design has {X.shape[-1]} columns, model expects {len(model.feature_names)}"
        )
    p = model.params
    fam = model.family
    if fam in ("ols", "ridge", "lasso"):
        s = X @ p["coef"] + p["intercept"]
    elif fam in ("logr-ridge", "logr-lasso"):
        s = sigmoid(X @ p["coef"] + p["intercept"])
    elif fam == "svm-linear":
        margin = X @ p["coef"] + p["intercept"]
        s = sigmoid(p["platt_slope"] * margin + p["platt_offset"])
    elif fam == "r-tree":
        s = _trees(p).leaf_values(X)[0]
    elif fam == "r-tree-bag":
        s = _trees(p).leaf_values(X).mean(axis=0)
    elif fam == "c-tree-bag":
        s = ensembles.vote_fraction(_trees(p).leaf_values(X))
    elif fam == "r-tree-boost":
        s = p["init"] + _trees(p).leaf_values(X).sum(axis=0)
    elif fam == "c-tree-boost":
        s = sigmoid(p["init"] + _trees(p).leaf_values(X).sum(axis=0))
    else:  # pragma: no cover - guarded by ModelSpec
        raise ValueError(fam)
    if hasattr(design, "matrix"):
        return PredictionScores(s, design.city_ids, design.years, design.segments)
    return PredictionScores(s)


def _encode(v):
    if isinstance(v, np.ndarray):
        return {"dtype": str(v.dtype), "shape": list(v.shape), "data": v.ravel().tolist()}
    return v


def _decode(v):
    if isinstance(v, dict) and {"dtype", "shape", "data"} <= v.keys():
        return np.asarray(v["data"], dtype=v["dtype"]).reshape(v["shape"])
    return v


def model_to_dict(model: FittedModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "spec": asdict(model.spec),
        "feature_names": list(model.feature_names),
        "params": {k: _encode(v) for k, v in model.params.items()},
    }


def model_from_dict(doc: dict) -> FittedModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not an sfca model document")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')}")
    known = {f.name for f in fields(ModelSpec)}
    spec = ModelSpec(**{k: v for k, v in doc["spec"].items() if k in known})
    params = {k: _decode(v) for k, v in doc["params"].items()}
    return FittedModel(spec, tuple(doc["feature_names"]), _freeze(params))


def save_model(model: FittedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> FittedModel:
    return model_from_dict(json.loads(Path(path).read_text()))
