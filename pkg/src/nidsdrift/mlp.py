"""Fully connected k -> 25 (ReLU) -> 10 (tanh) -> 1 (sigmoid) intrusion classifier.

Everything is plain numpy at float64 so that both the parameter gradients
used for training and the input gradients used by the attacks come out of
the same hand-written backward pass.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

HIDDEN_SIZES = (25, 10)
MODEL_FORMAT_VERSION = 1
PROB_CLIP = 1e-12
OPTIMIZERS = ("adam", "sgd")
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-7


class TrainingDivergence(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    train_step_count: int = 0

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    def copy(self) -> "MlpModel":
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "layer_sizes": list(self.layer_sizes),
            "activations": ["relu", "tanh", "sigmoid"],
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "train_step_count": self.train_step_count,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MlpModel":
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {doc.get('format_version')!r}")
        weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
        model = cls(list(doc["layer_sizes"]), weights, biases, int(doc["train_step_count"]))
        _check_shapes(model)
        return model

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    dropout: float = 0.5
    epochs: int = 20
    batch_size: int = 256
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass
class TrainLog:
    mean_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.mean_loss[-1]


def _check_shapes(model: MlpModel) -> None:
    sizes = model.layer_sizes
    if len(sizes) != 4 or len(model.weights) != 3 or len(model.biases) != 3:
        raise ValueError("model must have exactly three weight layers")
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
            raise ValueError(f"layer {i} has shape {w.shape}/{b.shape}, expected "
                             f"{(sizes[i + 1], sizes[i])}/{(sizes[i + 1],)}")


def init_model(k: int, seed: int) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    sizes = [k, *HIDDEN_SIZES, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _as_batch(model: MlpModel, X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_size:
        raise ValueError(f"expected inputs of width {model.input_size}, got shape {X.shape}")
    return X, single


def _forward_cache(model: MlpModel, X: np.ndarray, masks=None):
    (W1, W2, W3), (b1, b2, b3) = model.weights, model.biases
    z1 = X @ W1.T + b1
    a1 = np.maximum(z1, 0.0)
    if masks is not None:
        a1 = a1 * masks[0]
    z2 = a1 @ W2.T + b2
    t2 = np.tanh(z2)
    a2 = t2 * masks[1] if masks is not None else t2
    z3 = a2 @ W3.T + b3
    p = sigmoid(z3[:, 0])
    return z1, a1, t2, a2, p


def bce(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    p = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def forward(model: MlpModel, X) -> np.ndarray | float:
    """Malicious probability for one input vector or a batch of rows."""
    X, single = _as_batch(model, X)
    p = _forward_cache(model, X)[-1]
    return float(p[0]) if single else p


def loss_and_gradients(model: MlpModel, X, y, masks=None):
    """Mean BCE over the batch, parameter gradients, and per-row input gradients.

    ``masks`` are the (already rescaled) dropout masks for the two hidden
    layers; ``None`` means inference mode. Input gradients are of the
    per-sample loss, not the batch mean.
    """
    X, _ = _as_batch(model, X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    (W1, W2, W3) = model.weights
    z1, a1, t2, a2, p = _forward_cache(model, X, masks)
    n = X.shape[0]

    dz3 = (p - y)[:, None]
    da2 = dz3 @ W3
    if masks is not None:
        da2 = da2 * masks[1]
    dz2 = da2 * (1.0 - t2 ** 2)
    da1 = dz2 @ W2
    if masks is not None:
        da1 = da1 * masks[0]
    dz1 = da1 * (z1 > 0)
    dx = dz1 @ W1

    grads_w = [dz1.T @ X / n, dz2.T @ a1 / n, dz3.T @ a2 / n]
    grads_b = [dz1.mean(axis=0), dz2.mean(axis=0), dz3.mean(axis=0)]
    return float(bce(p, y).mean()), grads_w, grads_b, dx


def input_gradient(model: MlpModel, x, y) -> np.ndarray:
    """Gradient of the BCE loss w.r.t. the input, dropout disabled.

    Accepts one vector (returns a vector) or a batch (returns one row per sample).
    """
    X, single = _as_batch(model, x)
    y = np.broadcast_to(np.asarray(y, dtype=np.float64), (X.shape[0],))
    dx = loss_and_gradients(model, X, y)[3]
    return dx[0] if single else dx


def predict_batch(model: MlpModel, X) -> np.ndarray:
    """Binary labels; a probability of exactly 0.5 counts as malicious."""
    X, _ = _as_batch(model, X)
    return (_forward_cache(model, X)[-1] >= 0.5).astype(np.int64)


def _dropout_masks(rng, n, rate):
    keep = 1.0 - rate
    return [
        (rng.random((n, size)) < keep) / keep for size in HIDDEN_SIZES
    ]


def train(model: MlpModel, X, y, cfg: TrainConfig) -> tuple[MlpModel, TrainLog]:
    """Mini-batch training on mean BCE, warm-started from ``model``.

    The input model is left untouched; the returned copy carries the
    accumulated ``train_step_count``. Optimizer state (Adam moments) lives
    only for the duration of one call.
    """
    X, _ = _as_batch(model, X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y disagree on the number of samples")

    m = model.copy()
    rng = np.random.default_rng(cfg.seed)
    log = TrainLog()
    n = X.shape[0]
    params = m.weights + m.biases
    moments = [(np.zeros_like(p), np.zeros_like(p)) for p in params]
    b1, b2 = ADAM_BETAS
    t = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            masks = _dropout_masks(rng, len(idx), cfg.dropout) if cfg.dropout > 0 else None
            loss, gw, gb, _ = loss_and_gradients(m, X[idx], y[idx], masks)
            if not np.isfinite(loss):
                raise TrainingDivergence(epoch, loss)
            total_loss += loss * len(idx)
            t += 1
            for p, g, (mom, vel) in zip(params, gw + gb, moments):
                if cfg.optimizer == "sgd":
                    p -= cfg.learning_rate * g
                    continue
                mom *= b1
                mom += (1 - b1) * g
                vel *= b2
                vel += (1 - b2) * g * g
                step = cfg.learning_rate * np.sqrt(1 - b2 ** t) / (1 - b1 ** t)
                p -= step * mom / (np.sqrt(vel) + ADAM_EPS)
            m.train_step_count += 1
        mean_loss = total_loss / n
        if not np.isfinite(mean_loss) or not all(np.isfinite(w).all() for w in m.weights):
            raise TrainingDivergence(epoch, mean_loss)
        log.mean_loss.append(mean_loss)
        log.train_accuracy.append(float((predict_batch(m, X) == y).mean()))
    return m, log
