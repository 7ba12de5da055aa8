"""Confusion counts and the four detection metrics (malicious is the positive class)."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

CONDITION_LABELS = {
    "pre-attack": "Pre-attack",
    "day_n": "Day n",
    "day_n_plus_1": "Day n+1",
}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsRow:
    condition: str
    attack_name: str
    accuracy: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsRow":
        return cls(**{k: doc[k] for k in ("condition", "attack_name", "accuracy",
                                          "precision", "recall", "f1")})


def confusion(true_labels, predicted_labels) -> ConfusionMatrix:
    t = np.asarray(true_labels).reshape(-1)
    p = np.asarray(predicted_labels).reshape(-1)
    if t.shape != p.shape:
        raise ValueError(f"label vectors differ in length: {t.size} vs {p.size}")
    if t.size == 0:
        raise ValueError("no labels to compare")
    t = t == 1
    p = p == 1
    return ConfusionMatrix(
        tp=int(np.sum(t & p)),
        tn=int(np.sum(~t & ~p)),
        fp=int(np.sum(~t & p)),
        fn=int(np.sum(t & ~p)),
    )


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def summarize(cm: ConfusionMatrix, condition: str = "", attack_name: str = "") -> MetricsRow:
    """Accuracy, precision, recall and F1; empty denominators give 0."""
    if cm.total <= 0:
        raise ValueError("empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    return MetricsRow(condition, attack_name, accuracy, precision, recall,
                      f1_score(precision, recall))


def render_table(rows: list[MetricsRow], caption: str) -> str:
    """Fixed-width table: one row per condition, columns Accuracy/Precision/Recall/F1."""
    header = f"{'':<12}{'Accuracy':>10}{'Precision':>11}{'Recall':>9}{'F1':>8}"
    rule = "-" * len(header)
    lines = [caption, rule, header, rule]
    for row in rows:
        label = CONDITION_LABELS.get(row.condition, row.condition)
        lines.append(f"{label:<12}{row.accuracy:>10.3f}{row.precision:>11.3f}"
                     f"{row.recall:>9.3f}{row.f1:>8.3f}")
    lines.append(rule)
    return "\n".join(lines)
