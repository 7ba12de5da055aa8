"""Fresh-versus-stale gradient experiment across one retraining step.

Day n: fit the pipeline and a fresh model, attack it with its own gradients.
Day n+1: warm-start retrain on the next day, attack it with the day-n oracle.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attacks import (
    ATTACK_NAMES,
    AttackBounds,
    FgsmConfig,
    GradientOracle,
    LowProFoolConfig,
    PgdConfig,
    pearson_importance,
    run_attack,
)
from .dataio import DayDataset, SynthConfig, generate_synthetic_days, load_day_csv, split_train_test
from .forest import ForestParams
from .metrics import MetricsRow, confusion, render_table, summarize
from .mlp import MlpModel, TrainConfig, TrainingDivergence, init_model, predict_batch, train
from .pipeline import FeaturePipeline, PipelineError, fit_pipeline, transform

log = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = 1


class ScenarioError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class CsvSource:
    directory: str
    label_column: str = "Label"


@dataclass(frozen=True)
class ScenarioConfig:
    data: CsvSource | SynthConfig = field(default_factory=SynthConfig)
    split_ratio: float = 0.8
    k: int = 32
    threshold: float = 0.9
    forest: ForestParams = field(default_factory=ForestParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    fgsm: FgsmConfig = field(default_factory=FgsmConfig)
    pgd: PgdConfig = field(default_factory=PgdConfig)
    lowprofool: LowProFoolConfig = field(default_factory=LowProFoolConfig)
    immutable_features: tuple[str, ...] = ()
    attacks_enabled: tuple[str, ...] = ATTACK_NAMES
    malicious_only: bool = False
    reuse_day_n_testset: bool = False
    start_day: int = 0
    seed: int = 42

    def __post_init__(self):
        if not self.attacks_enabled:
            raise ValueError("at least one attack must be enabled")
        unknown = set(self.attacks_enabled) - set(ATTACK_NAMES)
        if unknown:
            raise ValueError(f"unknown attacks {sorted(unknown)}")
        if len(set(self.attacks_enabled)) != len(self.attacks_enabled):
            raise ValueError("attacks_enabled has duplicates")
        if self.start_day < 0:
            raise ValueError("start_day must be non-negative")
        if isinstance(self.data, SynthConfig) and self.data.days < self.start_day + 2:
            raise ValueError(f"synthetic stream has {self.data.days} days; "
                             f"need days {self.start_day} and {self.start_day + 1}")

    def resolved(self) -> "ScenarioConfig":
        """Copy with every sub-seed derived from the master seed and attacks in canonical order."""
        rep = dataclasses.replace
        return rep(
            self,
            forest=rep(self.forest, seed=self.seed),
            train=rep(self.train, seed=self.seed),
            pgd=rep(self.pgd, seed=self.seed),
            attacks_enabled=tuple(a for a in ATTACK_NAMES if a in self.attacks_enabled),
            immutable_features=tuple(self.immutable_features),
        )

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["data"] = {"kind": "synthetic" if isinstance(self.data, SynthConfig) else "csv",
                       **dataclasses.asdict(self.data)}
        return json.loads(json.dumps(doc))

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        doc = dict(doc)
        data = dict(doc.pop("data"))
        kind = data.pop("kind")
        source = SynthConfig(**data) if kind == "synthetic" else CsvSource(**data)
        lpf = dict(doc.pop("lowprofool"))
        if lpf.get("importance") is not None:
            lpf["importance"] = tuple(lpf["importance"])
        return cls(
            data=source,
            forest=ForestParams(**doc.pop("forest")),
            train=TrainConfig(**doc.pop("train")),
            fgsm=FgsmConfig(**doc.pop("fgsm")),
            pgd=PgdConfig(**doc.pop("pgd")),
            lowprofool=LowProFoolConfig(**lpf),
            immutable_features=tuple(doc.pop("immutable_features")),
            attacks_enabled=tuple(doc.pop("attacks_enabled")),
            **doc,
        )


@dataclass(frozen=True)
class ScenarioReport:
    rows: tuple[MetricsRow, ...]
    config_echo: dict
    model_fingerprints: dict[str, str]
    oracle_fingerprint: str
    selected_features: tuple[str, ...]

    def row(self, condition: str, attack_name: str = "") -> MetricsRow:
        for r in self.rows:
            if r.condition == condition and (condition == "pre-attack" or r.attack_name == attack_name):
                return r
        raise KeyError((condition, attack_name))

    @property
    def attacks(self) -> list[str]:
        return [r.attack_name for r in self.rows if r.condition == "day_n"]

    def to_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "rows": [r.to_dict() for r in self.rows],
            "config": self.config_echo,
            "model_fingerprints": dict(self.model_fingerprints),
            "oracle_fingerprint": self.oracle_fingerprint,
            "selected_features": list(self.selected_features),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioReport":
        if doc.get("format_version") != REPORT_FORMAT_VERSION:
            raise ValueError(f"unsupported report format {doc.get('format_version')!r}")
        return cls(
            rows=tuple(MetricsRow.from_dict(r) for r in doc["rows"]),
            config_echo=doc["config"],
            model_fingerprints=dict(doc["model_fingerprints"]),
            oracle_fingerprint=doc["oracle_fingerprint"],
            selected_features=tuple(doc["selected_features"]),
        )

    def render_text(self) -> str:
        pre = self.row("pre-attack")
        tables = []
        for name in self.attacks:
            rows = [pre, self.row("day_n", name), self.row("day_n_plus_1", name)]
            tables.append(render_table(rows, f"Attack: {name}"))
        return "\n\n".join(tables) + "\n"


@dataclass
class ScenarioRun:
    report: ScenarioReport
    pipeline: FeaturePipeline
    model_day_n: MlpModel
    model_day_n_plus_1: MlpModel
    oracle: GradientOracle
    adversarial: dict[tuple[str, str], np.ndarray]
    labels: dict[str, np.ndarray]


def load_days(cfg: ScenarioConfig) -> tuple[DayDataset, DayDataset]:
    n = cfg.start_day
    if isinstance(cfg.data, SynthConfig):
        days = generate_synthetic_days(cfg.data)
        return days[n], days[n + 1]
    directory = Path(cfg.data.directory)
    out = []
    for day in (n, n + 1):
        path = directory / f"day_{day}.csv"
        if not path.is_file():
            raise ScenarioError("load", f"missing day file {path}")
        out.append(load_day_csv(path, day, cfg.data.label_column))
    return out[0], out[1]


def _bounds(cfg: ScenarioConfig, pipeline: FeaturePipeline) -> AttackBounds:
    unknown = [f for f in cfg.immutable_features if f not in pipeline.selected]
    if unknown:
        log.warning("immutable features %s are not among the selected features", unknown)
    immutable = [pipeline.selected.index(f) for f in cfg.immutable_features if f in pipeline.selected]
    return AttackBounds.unit_box(len(pipeline.selected), immutable)


def _attack_batch(name, oracle, X, y, configs, bounds, malicious_only):
    if not malicious_only:
        return run_attack(name, oracle, X, y, configs, bounds)
    out = X.copy()
    rows = np.flatnonzero(y == 1)
    if rows.size:
        out[rows] = run_attack(name, oracle, X[rows], y[rows], configs, bounds)
    return out


def _evaluate(model, X, y, condition, attack_name) -> MetricsRow:
    return summarize(confusion(y, predict_batch(model, X)), condition, attack_name)


def execute_scenario(cfg: ScenarioConfig, days: tuple[DayDataset, DayDataset] | None = None) -> ScenarioRun:
    cfg = cfg.resolved()
    try:
        day_n, day_n1 = days if days is not None else load_days(cfg)
    except (OSError, ValueError) as exc:
        raise ScenarioError("load", str(exc)) from exc

    try:
        split_n = split_train_test(day_n, cfg.split_ratio, cfg.seed)
        pipeline = fit_pipeline(split_n.train, cfg.k, cfg.threshold, cfg.forest)
        X_train, y_train = transform(pipeline, split_n.train)
        X_test, y_test = transform(pipeline, split_n.test)
    except (PipelineError, ValueError) as exc:
        raise ScenarioError("pipeline", str(exc)) from exc
    log.info("day %d: selected %d features", day_n.day_index, len(pipeline.selected))

    try:
        model_n, _ = train(init_model(cfg.k, cfg.seed), X_train, y_train, cfg.train)
    except TrainingDivergence as exc:
        raise ScenarioError("train_day_n", str(exc)) from exc

    rows = [_evaluate(model_n, X_test, y_test, "pre-attack", "")]

    bounds = _bounds(cfg, pipeline)
    lpf = cfg.lowprofool
    if "lowprofool" in cfg.attacks_enabled and lpf.importance is None:
        lpf = dataclasses.replace(lpf, importance=tuple(pearson_importance(X_train, y_train)))
    configs = {"fgsm": cfg.fgsm, "pgd": cfg.pgd, "lowprofool": lpf}

    oracle = GradientOracle.freeze(model_n, day_n.day_index)
    adversarial = {}
    for name in cfg.attacks_enabled:
        X_adv = _attack_batch(name, oracle, X_test, y_test, configs, bounds, cfg.malicious_only)
        adversarial[(name, "day_n")] = X_adv
        rows.append(_evaluate(model_n, X_adv, y_test, "day_n", name))

    try:
        split_n1 = split_train_test(day_n1, cfg.split_ratio, cfg.seed + 1)
        X_train1, y_train1 = transform(pipeline, split_n1.train)
        if cfg.reuse_day_n_testset:
            X_test1, y_test1 = X_test, y_test
        else:
            X_test1, y_test1 = transform(pipeline, split_n1.test)
    except (PipelineError, ValueError) as exc:
        raise ScenarioError("transform_day_n_plus_1", str(exc)) from exc

    try:
        train_cfg1 = dataclasses.replace(cfg.train, seed=cfg.train.seed + 1)
        model_n1, _ = train(model_n, X_train1, y_train1, train_cfg1)
    except TrainingDivergence as exc:
        raise ScenarioError("train_day_n_plus_1", str(exc)) from exc

    for name in cfg.attacks_enabled:
        X_adv = _attack_batch(name, oracle, X_test1, y_test1, configs, bounds, cfg.malicious_only)
        adversarial[(name, "day_n_plus_1")] = X_adv
        rows.append(_evaluate(model_n1, X_adv, y_test1, "day_n_plus_1", name))

    # rows grouped as pre-attack, then every attack's day_n, then every day_n_plus_1
    report = ScenarioReport(
        rows=tuple(rows),
        config_echo=cfg.to_dict(),
        model_fingerprints={"day_n": model_n.fingerprint(), "day_n_plus_1": model_n1.fingerprint()},
        oracle_fingerprint=oracle.fingerprint(),
        selected_features=pipeline.selected,
    )
    labels = {"day_n": y_test, "day_n_plus_1": y_test1}
    return ScenarioRun(report, pipeline, model_n, model_n1, oracle, adversarial, labels)


def run_temporal_scenario(cfg: ScenarioConfig) -> ScenarioReport:
    return execute_scenario(cfg).report
