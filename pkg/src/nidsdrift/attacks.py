"""White-box evasion attacks in the scaled feature space.

Every attack differentiates through a :class:`GradientOracle`, a frozen copy
of the victim taken at some day. Passing an oracle from an earlier day than
the victim being evaluated is how stale-gradient attacks are expressed.

All functions accept a single vector or a batch (one sample per row) and
preserve row order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mlp import MlpModel, input_gradient, predict_batch

ATTACK_NAMES = ("fgsm", "pgd", "lowprofool")


@dataclass(frozen=True)
class GradientOracle:
    snapshot: MlpModel
    snapshot_day: int

    @classmethod
    def freeze(cls, model: MlpModel, day: int) -> "GradientOracle":
        snap = model.copy()
        for arr in (*snap.weights, *snap.biases):
            arr.flags.writeable = False
        return cls(snap, day)

    def gradient(self, X, y) -> np.ndarray:
        return input_gradient(self.snapshot, X, y)

    def predict(self, X) -> np.ndarray:
        return predict_batch(self.snapshot, X)

    def fingerprint(self) -> str:
        return self.snapshot.fingerprint()


@dataclass(frozen=True)
class AttackBounds:
    lower: np.ndarray
    upper: np.ndarray
    immutable_mask: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        mask = np.asarray(self.immutable_mask, dtype=bool)
        if not lower.shape == upper.shape == mask.shape or lower.ndim != 1:
            raise ValueError("lower, upper and immutable_mask must be vectors of one length")
        if (lower > upper).any():
            raise ValueError("lower must not exceed upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "immutable_mask", mask)

    @classmethod
    def unit_box(cls, k: int, immutable=()) -> "AttackBounds":
        mask = np.zeros(k, dtype=bool)
        mask[list(immutable)] = True
        return cls(np.zeros(k), np.ones(k), mask)


@dataclass(frozen=True)
class FgsmConfig:
    epsilon: float = 0.1

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass(frozen=True)
class PgdConfig:
    epsilon: float = 0.1
    step_size: float = 0.025
    steps: int = 10
    random_start: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass(frozen=True)
class LowProFoolConfig:
    max_iters: int = 50
    step_size: float = 0.05
    tradeoff_lambda: float = 1.0
    # None: the scenario fills in pearson_importance of the training data
    importance: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if self.tradeoff_lambda < 0:
            raise ValueError("tradeoff_lambda must be >= 0")
        if self.importance is not None:
            imp = tuple(float(v) for v in self.importance)
            if any(v < 0 for v in imp):
                raise ValueError("importance entries must be >= 0")
            object.__setattr__(self, "importance", imp)


def project(x, bounds: AttackBounds, x_orig) -> np.ndarray:
    """Clamp into the bounds box, then restore immutable coordinates."""
    out = np.clip(np.asarray(x, dtype=np.float64), bounds.lower, bounds.upper)
    return np.where(bounds.immutable_mask, x_orig, out)


def _labels_for(X: np.ndarray, y) -> np.ndarray:
    return np.broadcast_to(np.asarray(y, dtype=np.float64), X.shape[:-1]).copy()


def fgsm(oracle: GradientOracle, x, y, cfg: FgsmConfig, bounds: AttackBounds) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if cfg.epsilon == 0:
        return x.copy()
    grad = oracle.gradient(x, _labels_for(x, y))
    return project(x + cfg.epsilon * np.sign(grad), bounds, x)


def pgd(oracle: GradientOracle, x, y, cfg: PgdConfig, bounds: AttackBounds) -> np.ndarray:
    """L-infinity PGD: signed ascent steps, each followed by box and ball projection."""
    x = np.asarray(x, dtype=np.float64)
    if cfg.epsilon == 0:
        return x.copy()
    y = _labels_for(x, y)
    lo, hi = x - cfg.epsilon, x + cfg.epsilon
    x_adv = x.copy()
    if cfg.random_start:
        noise = np.random.default_rng(cfg.seed).uniform(-cfg.epsilon, cfg.epsilon, x.shape)
        x_adv = project(x + noise, bounds, x)
    for _ in range(cfg.steps):
        step = x_adv + cfg.step_size * np.sign(oracle.gradient(x_adv, y))
        x_adv = np.clip(project(step, bounds, x), lo, hi)
    return x_adv


def pearson_importance(X, y) -> np.ndarray:
    """|Pearson correlation| of each column with the labels, scaled to unit 2-norm."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.unique(y).size < 2:
        raise ValueError("pearson_importance needs both classes present")
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((Xc ** 2).sum(axis=0))
    if (sx == 0).any():
        raise ValueError(f"zero-variance columns: {np.flatnonzero(sx == 0).tolist()}")
    r = np.abs(Xc.T @ yc) / (sx * np.sqrt((yc ** 2).sum()))
    norm = np.linalg.norm(r)
    return r / norm if norm > 0 else r


def lowprofool(oracle: GradientOracle, x, y, cfg: LowProFoolConfig,
               bounds: AttackBounds) -> np.ndarray:
    """Importance-weighted targeted descent toward the opposite class.

    Minimises BCE(f(x + r), 1 - y) + lambda * ||v * r||^2 and keeps, per
    sample, the successful iterate with the smallest weighted norm.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if cfg.importance is None:
        raise ValueError("LowProFoolConfig.importance must be set")
    v = np.asarray(cfg.importance, dtype=np.float64)
    if v.shape != (X.shape[1],):
        raise ValueError(f"importance has length {v.size}, inputs have width {X.shape[1]}")
    target = 1.0 - _labels_for(X, y)
    true_label = 1 - target.astype(np.int64)

    x_cur = X.copy()
    best = X.copy()
    best_norm = np.full(X.shape[0], np.inf)
    for _ in range(cfg.max_iters):
        r = x_cur - X
        grad = oracle.gradient(x_cur, target) + 2.0 * cfg.tradeoff_lambda * v ** 2 * r
        x_cur = project(x_cur - cfg.step_size * grad, bounds, X)
        fooled = oracle.predict(x_cur) != true_label
        norm = np.linalg.norm(v * (x_cur - X), axis=1)
        better = fooled & (norm < best_norm)
        best[better] = x_cur[better]
        best_norm[better] = norm[better]
    out = np.where(np.isfinite(best_norm)[:, None], best, x_cur)
    return out[0] if single else out


def run_attack(name: str, oracle: GradientOracle, X, y, configs: dict,
               bounds: AttackBounds) -> np.ndarray:
    """Dispatch by attack name; ``configs`` maps names to their config objects."""
    fn = {"fgsm": fgsm, "pgd": pgd, "lowprofool": lowprofool}.get(name)
    if fn is None:
        raise ValueError(f"unknown attack {name!r}; expected one of {ATTACK_NAMES}")
    return fn(oracle, X, y, configs[name], bounds)


def write_adversarial_csv(path, X_adv, orig_labels, attack_name: str, oracle_day: int,
                          feature_names) -> None:
    X_adv = np.atleast_2d(np.asarray(X_adv, dtype=np.float64))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*feature_names, "orig_label", "attack_name", "oracle_day"])
        for row, label in zip(X_adv, orig_labels):
            writer.writerow([*(repr(float(v)) for v in row), int(label), attack_name, oracle_day])


def read_adversarial_csv(path):
    """Inverse of :func:`write_adversarial_csv`: (names, X, labels, attack names, oracle days)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    names = header[:-3]
    X = np.array([[float(c) for c in r[:-3]] for r in rows], dtype=np.float64).reshape(len(rows), len(names))
    labels = np.array([int(r[-3]) for r in rows], dtype=np.int64)
    return names, X, labels, [r[-2] for r in rows], [int(r[-1]) for r in rows]
