"""From-scratch fully-connected binary classifier.

ReLU hidden layers, 2-way softmax output, mean cross-entropy loss, and
mini-batch gradient descent with momentum. Everything is plain numpy and
deterministic given seeds; a trained model is immutable and safe to share
across concurrent inference contexts.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadDims,
    CorruptModel,
    DimMismatch,
    EmptyDataset,
    IoFailure,
    NonFiniteLoss,
)
from .landmarks import DEFAULT_SELECTION, FeatureMode, FeatureVector, KeypointSelection, Label

DEFAULT_HIDDEN_DIMS = (128, 64)
N_CLASSES = 2
MODEL_FORMAT = "exammon-model"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClassifierModel:
    """Network parameters plus the feature recipe they were trained for."""

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...] = field(repr=False)
    biases: tuple[np.ndarray, ...] = field(repr=False)
    feature_mode: FeatureMode
    selection: KeypointSelection
    seed: int

    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClassifierModel):
            return NotImplemented
        return (
            self.layer_dims == other.layer_dims
            and self.feature_mode is other.feature_mode
            and self.selection == other.selection
            and self.seed == other.seed
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    shuffle_seed: int = 0
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")


@dataclass(frozen=True)
class Metrics:
    """Confusion counts with Abnormal as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
        }


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    val_accuracy: float | None = None
    val_precision: float | None = None
    val_recall: float | None = None


def init_model(
    layer_dims: Sequence[int] | None = None,
    seed: int = 0,
    feature_mode: FeatureMode = FeatureMode.DIST171,
    selection: KeypointSelection = DEFAULT_SELECTION,
) -> ClassifierModel:
    """Deterministic scaled-uniform initialization; biases start at zero."""
    dims = tuple(int(d) for d in (layer_dims if layer_dims is not None
                                  else (feature_mode.dims, *DEFAULT_HIDDEN_DIMS, N_CLASSES)))
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise BadDims(f"layer dims must be >= 2 positive widths, got {dims}")
    if dims[0] != feature_mode.dims:
        raise BadDims(f"first layer is {dims[0]} but {feature_mode.value} has {feature_mode.dims} features")
    if dims[-1] != N_CLASSES:
        raise BadDims(f"binary classifier needs {N_CLASSES} outputs, got {dims[-1]}")

    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        w.flags.writeable = False
        b = np.zeros(fan_out)
        b.flags.writeable = False
        weights.append(w)
        biases.append(b)
    return ClassifierModel(
        layer_dims=dims,
        weights=tuple(weights),
        biases=tuple(biases),
        feature_mode=feature_mode,
        selection=selection,
        seed=int(seed),
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _forward_batch(weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    """Probabilities (n, 2) for a batch of inputs (n, d)."""
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
    return _softmax(a @ weights[-1] + biases[-1])


def _check_features(model: ClassifierModel, features: FeatureVector) -> np.ndarray:
    if features.mode is not model.feature_mode:
        raise DimMismatch(f"model consumes {model.feature_mode.value}, got {features.mode.value}")
    return features.values


def forward(model: ClassifierModel, features: FeatureVector) -> tuple[float, float]:
    """Probability pair (p_normal, p_abnormal); sums to 1."""
    values = _check_features(model, features)
    probs = _forward_batch(model.weights, model.biases, values[None, :])[0]
    return float(probs[0]), float(probs[1])


def predict(model: ClassifierModel, features: FeatureVector, threshold: float = 0.5) -> tuple[Label, float]:
    """Abnormal iff p_abnormal > threshold; ties resolve to Normal."""
    _, p_abnormal = forward(model, features)
    return (Label.ABNORMAL if p_abnormal > threshold else Label.NORMAL), p_abnormal


def loss_and_gradients(
    model: ClassifierModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy and its analytic gradients via backpropagation."""
    return _loss_and_grads(list(model.weights), list(model.biases), x, y)


def cross_entropy(model: ClassifierModel, x: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy of the batch under the model."""
    a = np.asarray(x, dtype=np.float64)
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
    logp = _log_softmax(a @ model.weights[-1] + model.biases[-1])
    return float(-logp[np.arange(len(y)), y].mean())


def _loss_and_grads(
    weights: list[np.ndarray], biases: list[np.ndarray], x: np.ndarray, y: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    n = x.shape[0]
    activations = [x]
    pre = []
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        activations.append(a)
    logits = a @ weights[-1] + biases[-1]

    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(n), y].mean())

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grads_w: list[np.ndarray] = [np.empty(0)] * len(weights)
    grads_b: list[np.ndarray] = [np.empty(0)] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (pre[layer - 1] > 0.0)
    return loss, grads_w, grads_b


def _check_arrays(model: ClassifierModel, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimMismatch(f"features {x.shape} do not pair with labels {y.shape}")
    if x.shape[0] == 0:
        raise EmptyDataset("need at least one sample")
    if x.shape[1] != model.layer_dims[0]:
        raise DimMismatch(f"model expects {model.layer_dims[0]} features, got {x.shape[1]}")
    if y.size and (y.min() < 0 or y.max() >= N_CLASSES):
        raise ValueError("labels must be 0 (normal) or 1 (abnormal)")
    return x, y


def train(
    model: ClassifierModel,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
    cfg: TrainConfig = TrainConfig(),
) -> tuple[ClassifierModel, list[EpochStats]]:
    """Mini-batch gradient descent with momentum; returns (trained model, history).

    Deterministic given the model seed and cfg.shuffle_seed. History holds one
    entry per epoch: mean training loss and validation metrics (None without
    a validation set).
    """
    x_train, y_train = _check_arrays(model, x_train, y_train)
    if (x_val is None) != (y_val is None):
        raise ValueError("provide both x_val and y_val, or neither")
    if x_val is not None:
        x_val, y_val = _check_arrays(model, x_val, y_val)

    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]

    rng = np.random.default_rng(cfg.shuffle_seed)
    n = x_train.shape[0]
    history: list[EpochStats] = []

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grads_w, grads_b = _loss_and_grads(weights, biases, x_train[batch], y_train[batch])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss diverged to {loss} at epoch {epoch}")
            epoch_loss += loss * len(batch)
            for layer in range(len(weights)):
                vel_w[layer] = cfg.momentum * vel_w[layer] - cfg.learning_rate * grads_w[layer]
                vel_b[layer] = cfg.momentum * vel_b[layer] - cfg.learning_rate * grads_b[layer]
                weights[layer] += vel_w[layer]
                biases[layer] += vel_b[layer]

        stats = EpochStats(epoch=epoch, loss=epoch_loss / n)
        if x_val is not None:
            trained = _with_params(model, weights, biases)
            m = evaluate(trained, x_val, y_val, threshold=cfg.threshold)
            stats = EpochStats(
                epoch=epoch,
                loss=epoch_loss / n,
                val_accuracy=m.accuracy,
                val_precision=m.precision,
                val_recall=m.recall,
            )
        history.append(stats)

    return _with_params(model, weights, biases), history


def _with_params(model: ClassifierModel, weights: list[np.ndarray], biases: list[np.ndarray]) -> ClassifierModel:
    ws, bs = [], []
    for w, b in zip(weights, biases):
        w = w.copy()
        b = b.copy()
        w.flags.writeable = False
        b.flags.writeable = False
        ws.append(w)
        bs.append(b)
    return ClassifierModel(
        layer_dims=model.layer_dims,
        weights=tuple(ws),
        biases=tuple(bs),
        feature_mode=model.feature_mode,
        selection=model.selection,
        seed=model.seed,
    )


def predict_batch(model: ClassifierModel, x: np.ndarray, threshold: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Labels (0/1) and p_abnormal for a feature matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.layer_dims[0]:
        raise DimMismatch(f"model expects (n, {model.layer_dims[0]}) features, got {x.shape}")
    p_abnormal = _forward_batch(model.weights, model.biases, x)[:, 1]
    return (p_abnormal > threshold).astype(np.intp), p_abnormal


def evaluate(model: ClassifierModel, x: np.ndarray, y: np.ndarray, threshold: float = 0.5) -> Metrics:
    """Confusion-count metrics over a labeled feature matrix."""
    x, y = _check_arrays(model, x, y)
    predicted, _ = predict_batch(model, x, threshold)
    return metrics_from_predictions(y, predicted)


def metrics_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> Metrics:
    y_true = np.asarray(y_true, dtype=np.intp)
    y_pred = np.asarray(y_pred, dtype=np.intp)
    return Metrics(
        tp=int(np.sum((y_pred == 1) & (y_true == 1))),
        fp=int(np.sum((y_pred == 1) & (y_true == 0))),
        fn=int(np.sum((y_pred == 0) & (y_true == 1))),
        tn=int(np.sum((y_pred == 0) & (y_true == 0))),
    )


def _model_payload(model: ClassifierModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "layer_dims": list(model.layer_dims),
        "feature_mode": model.feature_mode.value,
        "selection": list(model.selection.indices),
        "seed": model.seed,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }


def _payload_checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def save_model(model: ClassifierModel, path: str | Path) -> None:
    """Write the self-describing model file (bitwise-faithful round trip)."""
    payload = _model_payload(model)
    payload["checksum"] = _payload_checksum({k: v for k, v in payload.items() if k != "checksum"})
    try:
        Path(path).write_text(json.dumps(payload), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write model to {path}: {exc}") from exc


def load_model(path: str | Path) -> ClassifierModel:
    """Load and integrity-check a model file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read model from {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"model file is not valid JSON: {exc}") from exc

    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise CorruptModel("not an exammon model file")
    stored = payload.get("checksum")
    if stored != _payload_checksum({k: v for k, v in payload.items() if k != "checksum"}):
        raise CorruptModel("checksum mismatch")

    try:
        dims = tuple(int(d) for d in payload["layer_dims"])
        mode = FeatureMode(payload["feature_mode"])
        selection = KeypointSelection(tuple(payload["selection"]))
        weights = tuple(np.asarray(w, dtype=np.float64) for w in payload["weights"])
        biases = tuple(np.asarray(b, dtype=np.float64) for b in payload["biases"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"model payload malformed: {exc}") from exc

    expected = list(zip(dims[:-1], dims[1:]))
    if [w.shape for w in weights] != [(i, o) for i, o in expected]:
        raise CorruptModel("weight shapes do not match layer dims")
    if [b.shape for b in biases] != [(o,) for _, o in expected]:
        raise CorruptModel("bias shapes do not match layer dims")
    if any(not np.all(np.isfinite(w)) for w in weights) or any(not np.all(np.isfinite(b)) for b in biases):
        raise CorruptModel("parameters must be finite")

    for arr in (*weights, *biases):
        arr.flags.writeable = False
    return ClassifierModel(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        feature_mode=mode,
        selection=selection,
        seed=int(payload.get("seed", 0)),
    )


def write_history_csv(history: Sequence[EpochStats], path: str | Path) -> None:
    """Export per-epoch training history as CSV."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "val_accuracy", "val_precision", "val_recall"])
            for st in history:
                writer.writerow([
                    st.epoch,
                    repr(st.loss),
                    "" if st.val_accuracy is None else repr(st.val_accuracy),
                    "" if st.val_precision is None else repr(st.val_precision),
                    "" if st.val_recall is None else repr(st.val_recall),
                ])
    except OSError as exc:
        raise IoFailure(f"cannot write history to {path}: {exc}") from exc
