"""Random-forest impurity importance (mean decrease in Gini), numpy only."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ForestParams:
    trees: int = 50
    max_depth: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.trees < 1 or self.max_depth < 1:
            raise ValueError("trees and max_depth must be >= 1")


@dataclass(frozen=True)
class ImportanceRanking:
    scores: dict[str, float]
    order: tuple[str, ...]

    @classmethod
    def from_scores(cls, scores: dict[str, float]) -> "ImportanceRanking":
        order = sorted(scores, key=lambda name: (-scores[name], name))
        return cls(dict(scores), tuple(order))

    def top(self, k: int) -> list[str]:
        return list(self.order[:k])


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p ** 2).sum())


def _best_split(x: np.ndarray, y: np.ndarray):
    """Best threshold on one feature: (child impurity sum weighted by size, threshold) or None."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = xs.size
    valid = np.flatnonzero(xs[:-1] < xs[1:])
    if valid.size == 0:
        return None
    pos_left = np.cumsum(ys)[valid]
    n_left = valid + 1.0
    n_right = n - n_left
    pos_right = ys.sum() - pos_left
    g_left = 1.0 - (pos_left / n_left) ** 2 - (1 - pos_left / n_left) ** 2
    g_right = 1.0 - (pos_right / n_right) ** 2 - (1 - pos_right / n_right) ** 2
    child = (n_left * g_left + n_right * g_right) / n
    i = int(np.argmin(child))
    threshold = 0.5 * (xs[valid[i]] + xs[valid[i] + 1])
    return float(child[i]), threshold


def _grow(X, y, idx, depth, params, n_total, n_candidates, rng, acc):
    yi = y[idx]
    n = idx.size
    pos = yi.sum()
    if depth >= params.max_depth or n < 2 or pos == 0 or pos == n:
        return
    parent = gini([n - pos, pos])
    candidates = rng.choice(X.shape[1], size=n_candidates, replace=False)
    best = None
    for f in candidates:
        found = _best_split(X[idx, f], yi)
        if found is not None and (best is None or found[0] < best[1]):
            best = (f, found[0], found[1])
    if best is None:
        return
    f, child, threshold = best
    gain = parent - child
    if gain <= 0:
        return
    acc[f] += (n / n_total) * gain
    go_left = X[idx, f] <= threshold
    _grow(X, y, idx[go_left], depth + 1, params, n_total, n_candidates, rng, acc)
    _grow(X, y, idx[~go_left], depth + 1, params, n_total, n_candidates, rng, acc)


def forest_importance(X, y, names, params: ForestParams = ForestParams()) -> ImportanceRanking:
    """Bootstrap ``params.trees`` Gini trees and average their impurity decreases.

    Each split looks at ceil(sqrt(F)) randomly drawn features. Scores are
    normalised to sum to one.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    names = list(names)
    n, f = X.shape
    if len(names) != f:
        raise ValueError("names and columns disagree")
    if n < 2 or np.unique(y).size < 2:
        raise ValueError("forest_importance needs at least two records and both classes")
    rng = np.random.default_rng(params.seed)
    n_candidates = min(f, math.ceil(math.sqrt(f)))
    totals = np.zeros(f)
    for _ in range(params.trees):
        boot = rng.integers(0, n, size=n)
        acc = np.zeros(f)
        _grow(X, y, boot, 0, params, n, n_candidates, rng, acc)
        totals += acc
    totals /= params.trees
    if totals.sum() <= 0:
        raise ValueError("no split with positive impurity decrease; data is degenerate")
    scores = totals / totals.sum()
    return ImportanceRanking.from_scores({name: float(s) for name, s in zip(names, scores)})
