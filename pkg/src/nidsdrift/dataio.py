"""Day-partitioned flow data: CSV loading, train/test splitting, synthetic streams."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

BENIGN_LABEL = "benign"
NULL_COLUMN = "__null__"
CONST_COLUMN = "__const__"
DUP_COLUMN = "__dup__"
RESERVED_COLUMNS = (NULL_COLUMN, CONST_COLUMN, DUP_COLUMN)


class DataError(ValueError):
    """Malformed or missing input data."""


@dataclass(frozen=True)
class RawRecord:
    """One labeled flow. ``None`` marks a null cell; infinities stay as floats."""

    names: tuple[str, ...]
    values: tuple[float | None, ...]
    label: int

    @property
    def features(self) -> list[tuple[str, float | None]]:
        return list(zip(self.names, self.values))


class DayDataset:
    """One day's labeled records, stored column-wise.

    Nulls are NaN in ``values``; +inf/-inf are kept as is. Arrays are made
    read-only so a dataset can be shared freely.
    """

    def __init__(self, day_index: int, feature_names: Sequence[str], values, labels):
        names = tuple(feature_names)
        values = np.array(values, dtype=np.float64, copy=True)
        labels = np.array(labels, dtype=np.int64, copy=True).reshape(-1)
        if day_index < 0:
            raise DataError("day_index must be non-negative")
        if not names:
            raise DataError("a dataset needs at least one feature")
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        if values.ndim != 2 or values.shape[1] != len(names):
            raise DataError(f"values shape {values.shape} does not match {len(names)} features")
        if values.shape[0] == 0:
            raise DataError("a dataset needs at least one record")
        if labels.shape[0] != values.shape[0]:
            raise DataError("labels and values disagree on the record count")
        if not np.isin(labels, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        values.flags.writeable = False
        labels.flags.writeable = False
        self.day_index = int(day_index)
        self.feature_names = names
        self.values = values
        self.labels = labels

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DayDataset):
            return NotImplemented
        return (
            self.day_index == other.day_index
            and self.feature_names == other.feature_names
            and np.array_equal(self.values, other.values, equal_nan=True)
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self) -> str:
        return (f"DayDataset(day_index={self.day_index}, features={len(self.feature_names)}, "
                f"records={len(self)}, malicious={int(self.labels.sum())})")

    @property
    def records(self) -> Iterator[RawRecord]:
        for row, label in zip(self.values, self.labels):
            vals = tuple(None if math.isnan(v) else float(v) for v in row)
            yield RawRecord(self.feature_names, vals, int(label))

    @classmethod
    def from_records(cls, day_index: int, records: Sequence[RawRecord]) -> "DayDataset":
        if not records:
            raise DataError("a dataset needs at least one record")
        names = records[0].names
        for i, rec in enumerate(records):
            if rec.names != names:
                raise DataError(f"record {i} has feature names that differ from record 0")
        values = [[math.nan if v is None else v for v in rec.values] for rec in records]
        return cls(day_index, names, values, [rec.label for rec in records])

    def subset(self, idx) -> "DayDataset":
        return DayDataset(self.day_index, self.feature_names, self.values[idx], self.labels[idx])

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]


@dataclass(frozen=True)
class SplitPair:
    train: DayDataset
    test: DayDataset
    seed: int


@dataclass(frozen=True)
class SynthConfig:
    days: int = 2
    records_per_day: int = 5000
    raw_feature_count: int = 32
    benign_fraction: float = 0.64
    drift_step: float = 0.5
    noise_std: float = 0.4
    inject_pathologies: bool = True
    seed: int = 42

    def __post_init__(self):
        if self.days < 1 or self.records_per_day < 1 or self.raw_feature_count < 1:
            raise ValueError("days, records_per_day and raw_feature_count must be positive")
        if not 0 < self.benign_fraction < 1:
            raise ValueError("benign_fraction must be in (0, 1)")
        if self.drift_step < 0:
            raise ValueError("drift_step must be non-negative")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")


def _parse_cell(text: str) -> float:
    token = text.strip()
    if not token:
        return math.nan
    try:
        return float(token)  # accepts inf / Infinity / -inf; "nan" becomes null
    except ValueError:
        return math.nan


def load_day_csv(path, day_index: int, label_column: str = "Label") -> DayDataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header")
        label_pos = header.index(label_column)
        names = [h for i, h in enumerate(header) if i != label_pos]
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} columns, "
                                f"header has {len(header)}")
            label = row[label_pos].strip()
            if not label:
                raise DataError(f"{path}: row {lineno} has an empty label")
            labels.append(0 if label.lower() == BENIGN_LABEL else 1)
            rows.append([_parse_cell(c) for i, c in enumerate(row) if i != label_pos])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return DayDataset(day_index, names, rows, labels)


def _format_cell(v: float) -> str:
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return repr(float(v))


def write_day_csv(ds: DayDataset, path, label_column: str = "Label") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*ds.feature_names, label_column])
        for row, label in zip(ds.values, ds.labels):
            writer.writerow([*(_format_cell(v) for v in row), "Malicious" if label else "Benign"])


def split_train_test(ds: DayDataset, ratio: float = 0.8, seed: int = 0) -> SplitPair:
    """Seeded shuffle, then the first round(ratio * n) records go to train (unstratified)."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    n = len(ds)
    n_train = round(ratio * n)
    if n_train == 0 or n_train == n:
        raise DataError(f"split of {n} records at ratio {ratio} leaves one side empty")
    order = np.random.default_rng(seed).permutation(n)
    return SplitPair(ds.subset(order[:n_train]), ds.subset(order[n_train:]), seed)


def class_means(cfg: SynthConfig, day: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Benign and malicious mean vectors of a synthetic stream on ``day``.

    On day 0 only the first half of the features (in a seeded order)
    separates the classes. Each class mean then moves by exactly
    ``drift_step`` per coordinate per day: on the separating half the two
    means walk toward each other, on the other half they walk apart, so
    which features carry the signal rotates over time.
    """
    rng = np.random.default_rng([cfg.seed, 0])
    f = cfg.raw_feature_count
    benign = rng.normal(0.0, 1.0, f)
    direction = rng.choice((-1.0, 1.0), f)
    informative = np.zeros(f, dtype=bool)
    informative[rng.permutation(f)[: (f + 1) // 2]] = True
    offset = np.where(informative, rng.uniform(0.5, 1.0, f), 0.0) * direction
    # +1: malicious mean moves along ``direction``; -1: against it
    malicious_dir = np.where(informative, -direction, direction)
    step = day * cfg.drift_step
    return benign - step * malicious_dir, benign + offset + step * malicious_dir


def generate_synthetic_days(cfg: SynthConfig) -> list[DayDataset]:
    """Gaussian class clusters whose means shift by ``drift_step`` per coordinate each day."""
    n_benign = round(cfg.benign_fraction * cfg.records_per_day)
    names = [f"f{i:02d}" for i in range(cfg.raw_feature_count)]
    if cfg.inject_pathologies:
        names += list(RESERVED_COLUMNS)
    days = []
    for day in range(cfg.days):
        rng = np.random.default_rng([cfg.seed, 1, day])
        mu_b, mu_m = class_means(cfg, day)
        labels = np.zeros(cfg.records_per_day, dtype=np.int64)
        labels[n_benign:] = 1
        labels = labels[rng.permutation(cfg.records_per_day)]
        centers = np.where(labels[:, None] == 1, mu_m, mu_b)
        values = centers + rng.normal(0.0, cfg.noise_std, centers.shape)
        if cfg.inject_pathologies:
            extra = np.column_stack([
                np.full(cfg.records_per_day, np.nan),
                np.ones(cfg.records_per_day),
                values[:, 0],
            ])
            values = np.hstack([values, extra])
        days.append(DayDataset(day, names, values, labels))
    return days
