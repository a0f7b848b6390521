"""Severity-weighted aggregation of pre- and post-drift models.

After a drift the deployed model is blended with a model trained on recent
data.  The blend weight of the new model is

    w = max(q_old, q_new) / (q_old + q_new)

where ``q_old`` and ``q_new`` are the third quartiles of the loss before and
after the change, so the new model always carries at least half the weight and
dominates more as the two error levels drift apart.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BadParam,
    DegenerateZero,
    DimensionMismatch,
    DomainError,
    EmptyBatch,
    EmptySegment,
    KindMismatch,
)

__all__ = [
    "AdaptConfig",
    "CombineMode",
    "EnsembleModel",
    "LossKind",
    "ModelKind",
    "OnlineModel",
    "SeverityWeight",
    "adapt_on_drift",
    "aggregate",
    "compute_loss",
    "flatten",
    "severity",
    "train",
]

_EPS = 1e-12


class ModelKind(str, enum.Enum):
    LINEAR_REGRESSION = "linear_regression"
    LOGISTIC_REGRESSION = "logistic_regression"


class CombineMode(str, enum.Enum):
    WEIGHT_AVERAGE = "weight_average"
    OUTPUT_AVERAGE = "output_average"


class LossKind(str, enum.Enum):
    SQUARED = "squared"
    CROSS_ENTROPY = "cross_entropy"
    ZERO_ONE = "zero_one"


def compute_loss(kind, y_true, y_pred):
    """Per-sample loss; ``y_pred`` is a probability for the classification losses."""
    kind = LossKind(kind)
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if kind is LossKind.SQUARED:
        return (y_true - y_pred) ** 2
    if kind is LossKind.CROSS_ENTROPY:
        prob = np.clip(y_pred, _EPS, 1.0 - _EPS)
        return -(y_true * np.log(prob) + (1.0 - y_true) * np.log(1.0 - prob))
    return ((y_pred >= 0.5) != (y_true >= 0.5)).astype(float)


def _sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class OnlineModel:
    """Linear or logistic model; ``weights[0]`` is the intercept."""

    kind: ModelKind
    weights: np.ndarray
    learning_rate: float = 0.05
    steps: int = 0

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        self.weights = np.array(self.weights, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.weights)):
            raise DomainError("model weights must be finite")
        if self.learning_rate <= 0:
            raise BadParam("learning_rate must be positive")
        if self.steps < 0:
            raise BadParam("steps must be non-negative")

    @classmethod
    def zeros(cls, kind, n_features, learning_rate=0.05):
        return cls(kind, np.zeros(n_features + 1), learning_rate)

    @property
    def n_features(self):
        return self.weights.shape[0] - 1

    def decision(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return X @ self.weights[1:] + self.weights[0]

    def predict(self, X):
        z = self.decision(X)
        return _sigmoid(z) if self.kind is ModelKind.LOGISTIC_REGRESSION else z

    def copy(self):
        return replace(self, weights=self.weights.copy())

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "weights": [float(v) for v in self.weights],
            "learning_rate": float(self.learning_rate),
            "steps": int(self.steps),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["kind"], data["weights"], data["learning_rate"], data["steps"])


@dataclass(frozen=True)
class SeverityWeight:
    q3_old: float
    q3_new: float
    w: float


def severity(old_errors, new_errors):
    """Severity weight from the third quartiles of the old and new loss segments."""
    old = np.asarray(getattr(old_errors, "values", old_errors), dtype=float).reshape(-1)
    new = np.asarray(getattr(new_errors, "values", new_errors), dtype=float).reshape(-1)
    if old.size == 0 or new.size == 0:
        raise EmptySegment("severity needs two non-empty error segments")
    if np.any(old < 0) or np.any(new < 0):
        raise DomainError("losses must be non-negative")
    q_old = float(np.quantile(old, 0.75))
    q_new = float(np.quantile(new, 0.75))
    total = q_old + q_new
    if total <= 0:
        raise DegenerateZero("both third quartiles are zero")
    return SeverityWeight(q_old, q_new, max(q_old, q_new) / total)


def _weight_value(w):
    value = w.w if isinstance(w, SeverityWeight) else float(w)
    if not 0.0 <= value <= 1.0:
        raise BadParam(f"aggregation weight must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class EnsembleModel:
    """Convex blend ``(1 - w) * old + w * new`` of two predictors."""

    old: object
    new: OnlineModel
    w: SeverityWeight
    combine_mode: CombineMode
    combined: OnlineModel | None = field(default=None, compare=False)

    @property
    def weight(self):
        return _weight_value(self.w)

    @property
    def kind(self):
        return self.new.kind

    @property
    def n_features(self):
        return self.new.n_features

    def predict(self, X):
        if self.combine_mode is CombineMode.WEIGHT_AVERAGE:
            return self.combined.predict(X)
        w = self.weight
        return (1.0 - w) * self.old.predict(X) + w * self.new.predict(X)

    def depth(self):
        inner = self.old.depth() if isinstance(self.old, EnsembleModel) else 0
        return 1 + inner

    def to_dict(self):
        return {
            "old": self.old.to_dict(),
            "new": self.new.to_dict(),
            "w": self.weight,
            "combine_mode": self.combine_mode.value,
        }

    @classmethod
    def from_dict(cls, data):
        old = data["old"]
        old = cls.from_dict(old) if "combine_mode" in old else OnlineModel.from_dict(old)
        new = OnlineModel.from_dict(data["new"])
        w = SeverityWeight(float("nan"), float("nan"), float(data["w"]))
        return aggregate(old, new, w, data["combine_mode"])


def aggregate(old, new, w, mode=CombineMode.WEIGHT_AVERAGE):
    """Blend ``old`` and ``new`` with new-model weight ``w``.

    ``WEIGHT_AVERAGE`` averages parameters (models must share kind and
    dimension); ``OUTPUT_AVERAGE`` averages predictions, which for logistic
    models means probabilities.
    """
    mode = CombineMode(mode)
    if not isinstance(w, SeverityWeight):
        w = SeverityWeight(float("nan"), float("nan"), float(w))
    value = _weight_value(w)
    if mode is CombineMode.OUTPUT_AVERAGE:
        return EnsembleModel(old, new, w, mode)
    old = flatten(old)
    if old.kind is not new.kind:
        raise KindMismatch(f"cannot average {old.kind.value} and {new.kind.value} weights")
    if old.n_features != new.n_features:
        raise DimensionMismatch("weight averaging needs models of equal dimension")
    combined = OnlineModel(
        new.kind,
        (1.0 - value) * old.weights + value * new.weights,
        new.learning_rate,
        new.steps,
    )
    return EnsembleModel(old, new, w, mode, combined)


def flatten(model):
    """Collapse an ensemble into a single parameter-averaged model.

    Exact for linear regression; for logistic output averages it is the
    logit-space approximation.
    """
    if isinstance(model, OnlineModel):
        return model
    if model.combine_mode is CombineMode.WEIGHT_AVERAGE:
        return model.combined
    old, new = flatten(model.old), flatten(model.new)
    w = model.weight
    return OnlineModel(new.kind, (1.0 - w) * old.weights + w * new.weights, new.learning_rate, new.steps)


def _as_xy(batch):
    if isinstance(batch, tuple):
        X, y = batch
        return np.atleast_2d(np.asarray(X, dtype=float)), np.asarray(y, dtype=float).reshape(-1)
    batch = list(batch)
    if not batch:
        return np.empty((0, 0)), np.empty(0)
    X = np.array([r.features for r in batch], dtype=float)
    y = np.array([r.target for r in batch], dtype=float)
    return X, y


def train(model, batch, epochs, seed=0):
    """Plain SGD over a shuffled batch; returns a new model.

    Squared loss for linear regression and log loss for logistic regression.
    ``batch`` is a list of records or an ``(X, y)`` tuple.
    """
    X, y = _as_xy(batch)
    if epochs < 0:
        raise BadParam("epochs must be non-negative")
    out = model.copy()
    if epochs == 0:
        return out
    if y.size == 0:
        raise EmptyBatch("cannot train on an empty batch")
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"expected {model.n_features} features, got {X.shape[1]}")
    logistic = model.kind is ModelKind.LOGISTIC_REGRESSION
    if logistic and not np.all((y == 0) | (y == 1)):
        raise DomainError("logistic targets must be 0 or 1")
    rng = np.random.default_rng(seed)
    Xa = np.column_stack([np.ones(len(y)), X])
    w = out.weights
    lr = out.learning_rate
    for _ in range(epochs):
        for i in rng.permutation(len(y)):
            x = Xa[i]
            z = x @ w
            if logistic:
                z = 1.0 / (1.0 + np.exp(-z)) if z >= 0 else np.exp(z) / (1.0 + np.exp(z))
            w -= lr * (z - y[i]) * x
    out.weights = w
    out.steps += epochs * len(y)
    return out


@dataclass(frozen=True)
class AdaptConfig:
    epochs: int = 20
    seed: int = 0
    combine_mode: CombineMode = CombineMode.WEIGHT_AVERAGE
    learning_rate: float = 0.05
    min_recent: int = 200
    loss_kind: LossKind = LossKind.SQUARED

    def __post_init__(self):
        object.__setattr__(self, "combine_mode", CombineMode(self.combine_mode))
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))
        if self.min_recent < 1:
            raise BadParam("min_recent must be positive")


def _old_predictor(current, mode):
    if mode is CombineMode.WEIGHT_AVERAGE or isinstance(current, OnlineModel):
        return flatten(current)
    # keep one level of output averaging so ensemble depth stays <= 2
    return EnsembleModel(flatten(current.old), flatten(current.new), current.w, current.combine_mode)


def adapt_on_drift(current, event, recent, pre_errors, cfg=AdaptConfig()):
    """Train a model on post-drift data and blend it with the deployed one.

    Parameters
    ----------
    current : OnlineModel or EnsembleModel
        The deployed predictor.
    event : DriftEvent
    recent : list of StreamRecord or (X, y)
        Labelled samples from the new concept.
    pre_errors : array-like
        Losses of ``current`` before the drift.
    """
    X, y = _as_xy(recent)
    if y.size == 0:
        raise EmptyBatch("no recent data to learn the new concept from")
    if not isinstance(recent, tuple):
        idx = [getattr(r, "index", None) for r in recent]
        if all(i is not None for i in idx) and min(idx) < event.stream_index:
            raise BadParam("recent records must come from at or after the drift")
    old = _old_predictor(current, cfg.combine_mode)
    base = OnlineModel.zeros(old.kind, X.shape[1], cfg.learning_rate)
    new = train(base, (X, y), cfg.epochs, cfg.seed)
    post_errors = compute_loss(cfg.loss_kind, y, old.predict(X))
    weight = severity(pre_errors, post_errors)
    return aggregate(old, new, weight, cfg.combine_mode)


def model_to_json(model):
    return json.dumps(model.to_dict())


def model_from_json(text):
    data = json.loads(text)
    if "combine_mode" in data:
        return EnsembleModel.from_dict(data)
    return OnlineModel.from_dict(data)
