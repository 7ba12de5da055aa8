"""Feature pipeline: cleaning, correlation grouping, forest ranking, top-k, min-max scaling."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataio import DayDataset
from .forest import ForestParams, ImportanceRanking, forest_importance

PIPELINE_FORMAT_VERSION = 1
DROP_REASONS = ("has_null", "has_inf", "constant")


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class CleaningSpec:
    dropped: tuple[tuple[str, str], ...]
    kept: tuple[str, ...]


@dataclass(frozen=True)
class CorrelationGroups:
    groups: tuple[tuple[str, ...], ...]
    representative: dict[str, str]  # keyed by the group's first member
    threshold: float

    def group_of(self, name: str) -> tuple[str, ...]:
        for g in self.groups:
            if name in g:
                return g
        raise KeyError(name)


def _columns(data, feature_names):
    if isinstance(data, DayDataset):
        return data.values, list(data.feature_names)
    values = np.asarray(data, dtype=np.float64)
    return values, list(feature_names)


def fit_cleaning(train, feature_names=None) -> CleaningSpec:
    """Drop every column with a null, an infinity, or a single distinct value.

    ``train`` is a DayDataset or an (n x F) array (NaN = null) with names.
    """
    values, names = _columns(train, feature_names)
    if values.shape[0] == 0:
        raise PipelineError("cannot fit cleaning on zero records")
    dropped, kept = [], []
    for j, name in enumerate(names):
        col = values[:, j]
        if np.isnan(col).any():
            dropped.append((name, "has_null"))
        elif np.isinf(col).any():
            dropped.append((name, "has_inf"))
        elif (col == col[0]).all():
            dropped.append((name, "constant"))
        else:
            kept.append(name)
    if not kept:
        raise PipelineError("cleaning dropped every feature")
    return CleaningSpec(tuple(dropped), tuple(kept))


def pearson_matrix(columns) -> np.ndarray:
    """Pairwise Pearson correlation of the columns of an (n x F) matrix."""
    X = np.asarray(columns, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    norms = np.sqrt((Xc ** 2).sum(axis=0))
    if (norms == 0).any():
        raise PipelineError(f"zero-variance columns {np.flatnonzero(norms == 0).tolist()}; "
                            "was cleaning skipped?")
    Z = Xc / norms
    corr = np.clip(Z.T @ Z, -1.0, 1.0)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return corr


def label_correlation(columns, labels) -> np.ndarray:
    X = np.asarray(columns, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    denom = np.sqrt((Xc ** 2).sum(axis=0) * (yc ** 2).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (Xc.T @ yc) / denom
    return np.nan_to_num(r)


def group_correlated(matrix, names, threshold: float = 0.9) -> CorrelationGroups:
    """Greedy grouping in name order; each seed absorbs ungrouped features with |r| >= threshold."""
    if not 0 < threshold <= 1:
        raise PipelineError("threshold must be in (0, 1]")
    matrix = np.asarray(matrix, dtype=np.float64)
    names = list(names)
    order = sorted(range(len(names)), key=lambda i: names[i])
    grouped = np.zeros(len(names), dtype=bool)
    groups, reps = [], {}
    for seed in order:
        if grouped[seed]:
            continue
        members = [j for j in order if not grouped[j] and abs(matrix[seed, j]) >= threshold]
        if seed not in members:
            members.insert(0, seed)
        grouped[members] = True
        group = tuple(names[j] for j in members)
        groups.append(group)
        reps[group[0]] = names[seed]
    return CorrelationGroups(tuple(groups), reps, threshold)


@dataclass(frozen=True)
class FeaturePipeline:
    cleaning: CleaningSpec
    groups: CorrelationGroups
    representatives: tuple[str, ...]
    ranking: ImportanceRanking
    selected: tuple[str, ...]
    scaler: dict[str, tuple[float, float]]
    k: int

    def to_dict(self) -> dict:
        return {
            "format_version": PIPELINE_FORMAT_VERSION,
            "k": self.k,
            "cleaning": {
                "dropped": [list(d) for d in self.cleaning.dropped],
                "kept": list(self.cleaning.kept),
            },
            "groups": {
                "threshold": self.groups.threshold,
                "groups": [list(g) for g in self.groups.groups],
                "representative": dict(self.groups.representative),
            },
            "representatives": list(self.representatives),
            "ranking": {"scores": dict(self.ranking.scores), "order": list(self.ranking.order)},
            "selected": list(self.selected),
            "scaler": {name: list(mm) for name, mm in self.scaler.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeaturePipeline":
        if doc.get("format_version") != PIPELINE_FORMAT_VERSION:
            raise PipelineError(f"unsupported pipeline format {doc.get('format_version')!r}")
        return cls(
            cleaning=CleaningSpec(tuple(tuple(d) for d in doc["cleaning"]["dropped"]),
                                  tuple(doc["cleaning"]["kept"])),
            groups=CorrelationGroups(tuple(tuple(g) for g in doc["groups"]["groups"]),
                                     dict(doc["groups"]["representative"]),
                                     float(doc["groups"]["threshold"])),
            representatives=tuple(doc["representatives"]),
            ranking=ImportanceRanking(dict(doc["ranking"]["scores"]), tuple(doc["ranking"]["order"])),
            selected=tuple(doc["selected"]),
            scaler={name: (float(lo), float(hi)) for name, (lo, hi) in doc["scaler"].items()},
            k=int(doc["k"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FeaturePipeline":
        return cls.from_dict(json.loads(text))


def fit_pipeline(train: DayDataset, k: int = 32, threshold: float = 0.9,
                 forest: ForestParams = ForestParams()) -> FeaturePipeline:
    cleaning = fit_cleaning(train)
    idx = [train.feature_names.index(name) for name in cleaning.kept]
    cols = train.values[:, idx]
    groups = group_correlated(pearson_matrix(cols), cleaning.kept, threshold)

    label_r = np.abs(label_correlation(cols, train.labels))
    by_name = dict(zip(cleaning.kept, label_r))
    representatives = tuple(
        min(group, key=lambda name: (-by_name[name], name)) for group in groups.groups
    )
    if len(representatives) < k:
        raise PipelineError(f"only {len(representatives)} uncorrelated features survive "
                            f"cleaning, cannot select k={k}")

    rep_idx = [cleaning.kept.index(name) for name in representatives]
    ranking = forest_importance(cols[:, rep_idx], train.labels, representatives, forest)
    selected = tuple(ranking.top(k))
    scaler = {}
    for name in selected:
        col = cols[:, cleaning.kept.index(name)]
        scaler[name] = (float(col.min()), float(col.max()))
    return FeaturePipeline(cleaning, groups, representatives, ranking, selected, scaler, k)


def transform(p: FeaturePipeline, ds: DayDataset) -> tuple[np.ndarray, np.ndarray]:
    """Min-max scale the selected features into [0, 1] (clamped); returns (X, y)."""
    missing = [name for name in p.selected if name not in ds.feature_names]
    if missing:
        raise PipelineError(f"records lack selected features {missing}")
    idx = [ds.feature_names.index(name) for name in p.selected]
    raw = ds.values[:, idx]
    bad = ~np.isfinite(raw)
    if bad.any():
        col = int(np.flatnonzero(bad.any(axis=0))[0])
        raise PipelineError(f"null or infinite value in selected feature {p.selected[col]!r}")
    lo = np.array([p.scaler[name][0] for name in p.selected])
    hi = np.array([p.scaler[name][1] for name in p.selected])
    X = np.clip((raw - lo) / (hi - lo), 0.0, 1.0)
    return X, ds.labels.astype(np.int64)
