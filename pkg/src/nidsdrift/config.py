"""INI experiment configs -> ScenarioConfig.

Sections: [data], [pipeline], [train], [attacks], [scenario]. Any key left
out takes the default of the matching dataclass field; the resolved config
(every default spelled out) is what gets echoed into manifests and reports.
A ``.json`` path is read as an already-resolved config, either bare or as
the ``resolved_config`` entry of a run manifest.
"""

from __future__ import annotations

import configparser
import json
from pathlib import Path

from .attacks import ATTACK_NAMES, FgsmConfig, LowProFoolConfig, PgdConfig
from .dataio import SynthConfig
from .forest import ForestParams
from .mlp import TrainConfig
from .scenario import CsvSource, ScenarioConfig

SECTIONS = ("data", "pipeline", "train", "attacks", "scenario")


class ConfigError(ValueError):
    pass


def _split_list(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _get(section, key, conv, default):
    if key not in section:
        return default
    try:
        if conv is bool:
            return section.getboolean(key)
        return conv(section[key])
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} = {section[key]!r}: {exc}") from None


def parse_ini(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(parser.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    for name in SECTIONS:
        if not parser.has_section(name):
            parser.add_section(name)
    data, pipe, tr, att, scen = (parser[name] for name in SECTIONS)

    seed = _get(scen, "seed", int, ScenarioConfig.seed)
    try:
        source_kind = data.get("source", "synthetic")
        if source_kind == "synthetic":
            d = SynthConfig()
            source = SynthConfig(
                days=_get(data, "days", int, d.days),
                records_per_day=_get(data, "records_per_day", int, d.records_per_day),
                raw_feature_count=_get(data, "raw_feature_count", int, d.raw_feature_count),
                benign_fraction=_get(data, "benign_fraction", float, d.benign_fraction),
                drift_step=_get(data, "drift_step", float, d.drift_step),
                noise_std=_get(data, "noise_std", float, d.noise_std),
                inject_pathologies=_get(data, "inject_pathologies", bool, d.inject_pathologies),
                seed=_get(data, "seed", int, seed),
            )
        elif source_kind == "csv":
            if "directory" not in data:
                raise ConfigError("[data] source = csv needs a directory")
            source = CsvSource(data["directory"], data.get("label_column", "Label"))
        else:
            raise ConfigError(f"[data] source must be synthetic or csv, not {source_kind!r}")

        f = ForestParams()
        t = TrainConfig()
        fg, pg, lp = FgsmConfig(), PgdConfig(), LowProFoolConfig()
        pgd_eps = _get(att, "pgd_epsilon", float, pg.epsilon)
        return ScenarioConfig(
            data=source,
            split_ratio=_get(scen, "split_ratio", float, ScenarioConfig.split_ratio),
            k=_get(pipe, "k", int, ScenarioConfig.k),
            threshold=_get(pipe, "threshold", float, ScenarioConfig.threshold),
            forest=ForestParams(trees=_get(pipe, "trees", int, f.trees),
                                max_depth=_get(pipe, "max_depth", int, f.max_depth)),
            train=TrainConfig(
                learning_rate=_get(tr, "learning_rate", float, t.learning_rate),
                dropout=_get(tr, "dropout", float, t.dropout),
                epochs=_get(tr, "epochs", int, t.epochs),
                batch_size=_get(tr, "batch_size", int, t.batch_size),
                optimizer=tr.get("optimizer", t.optimizer),
            ),
            fgsm=FgsmConfig(_get(att, "fgsm_epsilon", float, fg.epsilon)),
            pgd=PgdConfig(
                epsilon=pgd_eps,
                step_size=_get(att, "pgd_step_size", float, pgd_eps / 4 if pgd_eps > 0 else pg.step_size),
                steps=_get(att, "pgd_steps", int, pg.steps),
                random_start=_get(att, "pgd_random_start", bool, pg.random_start),
            ),
            lowprofool=LowProFoolConfig(
                max_iters=_get(att, "lowprofool_max_iters", int, lp.max_iters),
                step_size=_get(att, "lowprofool_step_size", float, lp.step_size),
                tradeoff_lambda=_get(att, "lowprofool_lambda", float, lp.tradeoff_lambda),
            ),
            immutable_features=_split_list(att.get("immutable_features", "")),
            attacks_enabled=_split_list(att.get("enabled", ",".join(ATTACK_NAMES))),
            malicious_only=_get(att, "malicious_only", bool, False),
            reuse_day_n_testset=_get(scen, "reuse_day_n_testset", bool, False),
            start_day=_get(scen, "start_day", int, 0),
            seed=seed,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
            doc = doc.get("resolved_config", doc)
            return ScenarioConfig.from_dict(doc)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: not a resolved scenario config: {exc}") from None
    return parse_ini(text)
