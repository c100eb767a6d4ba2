"""One-vs-rest linear SVMs on activation frames.

Each event gets a binary classifier trained on the L2-regularized, class
weighted hinge loss::

    lam/2 |w|^2 + 1/n sum_i c_i max(0, 1 - y_i (w . x_i + b)),   lam = 1/(C n)

with ``c_i = positive_class_weight`` for frames containing the event and 1
otherwise. The bias is not regularized. The solver is full-batch subgradient
descent with step ``1/(lam t)``; a step is halved until the objective does
not increase, so the per-epoch objective trace is monotone.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, FingerprintMismatch, FormatError
from .events import EventRoll

log = logging.getLogger(__name__)


class Scaling(str, enum.Enum):
    NONE = "none"
    PER_DIM_MAX = "per_dim_max"
    LOG_COMPRESS = "log_compress"


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    positive_class_weight: float = 3.0
    max_epochs: int = 100
    seed: int = 0
    feature_scaling: str = Scaling.PER_DIM_MAX.value
    max_halvings: int = 60

    def __post_init__(self):
        if self.C <= 0:
            raise ConfigError("C must be positive")
        if self.positive_class_weight <= 0:
            raise ConfigError("positive_class_weight must be positive")
        Scaling(self.feature_scaling)


@dataclass(frozen=True)
class FeatureScaler:
    method: str
    scale: tuple = ()

    @classmethod
    def fit(cls, X, method) -> "FeatureScaler":
        method = Scaling(method).value
        if method == Scaling.PER_DIM_MAX.value:
            mx = X.max(axis=1)
            mx[mx <= 0] = 1.0
            return cls(method, tuple(float(v) for v in mx))
        return cls(method)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.method == Scaling.PER_DIM_MAX.value:
            if X.shape[0] != len(self.scale):
                raise DimensionError(f"expected {len(self.scale)} feature rows, got {X.shape[0]}")
            return X / np.asarray(self.scale)[:, None]
        if self.method == Scaling.LOG_COMPRESS.value:
            return np.log1p(X)
        return X


@dataclass(frozen=True)
class LinearClassifier:
    weights: np.ndarray
    bias: float
    event_id: str
    objective_trace: tuple = field(default=(), compare=False)

    def decision(self, X) -> np.ndarray:
        return self.weights @ X + self.bias


def _objective(w, b, X, y, c, lam):
    margins = 1.0 - y * (w @ X + b)
    return 0.5 * lam * float(w @ w) + float(np.mean(c * np.maximum(margins, 0.0)))


def train_binary(X, y, cfg: TrainConfig, event_id="") -> LinearClassifier:
    """``X`` is ``(dim, n)``, ``y`` in {-1, +1}."""
    d, n = X.shape
    lam = 1.0 / (cfg.C * n)
    c = np.where(y > 0, cfg.positive_class_weight, 1.0)
    w = np.zeros(d)
    b = 0.0
    obj = _objective(w, b, X, y, c, lam)
    trace = [obj]
    for t in range(1, cfg.max_epochs + 1):
        margins = 1.0 - y * (w @ X + b)
        active = margins > 0
        coef = -(c * y * active) / n
        gw = lam * w + X @ coef
        gb = float(coef.sum())
        step = 1.0 / (lam * t)
        for _ in range(cfg.max_halvings):
            w_new, b_new = w - step * gw, b - step * gb
            obj_new = _objective(w_new, b_new, X, y, c, lam)
            if obj_new <= obj:
                w, b, obj = w_new, b_new, obj_new
                break
            step *= 0.5
        trace.append(obj)
    return LinearClassifier(w, b, event_id, tuple(trace))


@dataclass
class ClassifierBank:
    """Per-event classifiers plus the feature scaling they were trained with."""

    classifiers: list
    scaler: FeatureScaler
    labels: list
    dictionary_fingerprint: str = ""
    skipped: list = field(default_factory=list)
    positive_counts: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.classifiers[0].weights) if self.classifiers else 0

    def check_fingerprint(self, fingerprint: str) -> None:
        if self.dictionary_fingerprint and fingerprint != self.dictionary_fingerprint:
            raise FingerprintMismatch(
                "classifier model was trained against a different dictionary "
                f"({self.dictionary_fingerprint[:12]} != {fingerprint[:12]})")

    def to_json(self) -> dict:
        return {
            "format": "csdl-aed-classifiers/1",
            "labels": self.labels,
            "dictionary_fingerprint": self.dictionary_fingerprint,
            "scaling": {"method": self.scaler.method, "scale": list(self.scaler.scale)},
            "skipped": self.skipped,
            "positive_counts": self.positive_counts,
            "classifiers": [{"event": c.event_id, "weights": c.weights.tolist(), "bias": c.bias}
                            for c in self.classifiers],
        }

    @classmethod
    def from_json(cls, data) -> "ClassifierBank":
        try:
            scaler = FeatureScaler(data["scaling"]["method"], tuple(data["scaling"]["scale"]))
            clfs = [LinearClassifier(np.asarray(c["weights"], dtype=np.float64), float(c["bias"]), c["event"])
                    for c in data["classifiers"]]
            return cls(clfs, scaler, list(data["labels"]), data.get("dictionary_fingerprint", ""),
                       list(data.get("skipped", [])), dict(data.get("positive_counts", {})))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed classifier model: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "ClassifierBank":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_json(data)


def train_ovr(H_D, frame_labels, cfg: TrainConfig = TrainConfig(), labels=None,
              fingerprint: str = "") -> ClassifierBank:
    """Train one classifier per event on the columns of ``H_D``.

    ``frame_labels`` is a sequence (one entry per column) of sets of event
    labels. Events with no positive or no negative frame are skipped and
    listed in ``bank.skipped``.
    """
    H_D = np.asarray(H_D, dtype=np.float64)
    if H_D.ndim != 2 or H_D.shape[1] != len(frame_labels):
        raise DimensionError(f"{H_D.shape[1] if H_D.ndim == 2 else '?'} frames but "
                             f"{len(frame_labels)} label sets")
    if labels is None:
        labels = sorted(set().union(*frame_labels)) if len(frame_labels) else []
    scaler = FeatureScaler.fit(H_D, cfg.feature_scaling)
    X = scaler(H_D)
    clfs, skipped, counts = [], [], {}
    for label in labels:
        y = np.array([1.0 if label in s else -1.0 for s in frame_labels])
        n_pos = int(np.sum(y > 0))
        counts[label] = n_pos
        if n_pos == 0 or n_pos == len(y):
            log.warning("event %s has %d/%d positive frames; no classifier trained",
                        label, n_pos, len(y))
            skipped.append(label)
            continue
        clfs.append(train_binary(X, y, cfg, label))
    return ClassifierBank(clfs, scaler, list(labels), fingerprint, skipped, counts)


def predict_frames(bank: ClassifierBank, H_T, frame_hop: float = 0.01) -> EventRoll:
    """``roll[e, t] = 1`` iff ``w_e . x_t + b_e > 0`` (strict)."""
    X = bank.scaler(np.asarray(H_T, dtype=np.float64))
    if bank.classifiers and X.shape[0] != bank.dim:
        raise DimensionError(f"activations have {X.shape[0]} rows, classifiers expect {bank.dim}")
    roll = np.zeros((len(bank.labels), X.shape[1]), dtype=np.uint8)
    index = {lab: i for i, lab in enumerate(bank.labels)}
    for clf in bank.classifiers:
        roll[index[clf.event_id]] = clf.decision(X) > 0
    return EventRoll(roll, list(bank.labels), frame_hop)


def frame_label_sets(events, frame_centers) -> list:
    """A frame is positive for an event whose interval covers the frame centre."""
    sets = [set() for _ in frame_centers]
    centers = np.asarray(frame_centers)
    for e in events:
        for i in np.flatnonzero((centers >= e.onset) & (centers < e.offset)):
            sets[i].add(e.label)
    return sets
