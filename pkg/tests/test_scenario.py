import dataclasses

import numpy as np
import pytest

from nidsdrift.attacks import ATTACK_NAMES
from nidsdrift.config import ConfigError, load_config, parse_ini
from nidsdrift.dataio import SynthConfig, generate_synthetic_days, write_day_csv
from nidsdrift.forest import ForestParams
from nidsdrift.mlp import TrainConfig
from nidsdrift.scenario import (
    CsvSource,
    ScenarioConfig,
    ScenarioError,
    ScenarioReport,
    execute_scenario,
    run_temporal_scenario,
)

SMALL = ScenarioConfig(
    data=SynthConfig(days=2, records_per_day=600, raw_feature_count=12, seed=3),
    k=8,
    forest=ForestParams(trees=8, max_depth=4),
    train=TrainConfig(epochs=8, batch_size=64),
    seed=3,
)


@pytest.fixture(scope="module")
def small_run():
    return execute_scenario(SMALL)


def test_report_has_one_pre_attack_and_two_rows_per_attack(small_run):
    rows = small_run.report.rows
    assert len(rows) == 7
    assert [r.condition for r in rows].count("pre-attack") == 1
    assert small_run.report.attacks == list(ATTACK_NAMES)
    for r in rows:
        for v in (r.accuracy, r.precision, r.recall, r.f1):
            assert 0.0 <= v <= 1.0


def test_single_attack_gives_three_rows():
    report = run_temporal_scenario(dataclasses.replace(SMALL, attacks_enabled=("fgsm",)))
    assert [(r.condition, r.attack_name) for r in report.rows] == [
        ("pre-attack", ""), ("day_n", "fgsm"), ("day_n_plus_1", "fgsm")]


def test_oracle_is_day_n_snapshot(small_run):
    fp = small_run.report.model_fingerprints
    assert small_run.report.oracle_fingerprint == fp["day_n"]
    assert fp["day_n"] != fp["day_n_plus_1"]
    assert small_run.model_day_n_plus_1.train_step_count > small_run.model_day_n.train_step_count


def test_scenario_is_deterministic(small_run):
    again = execute_scenario(SMALL)
    assert again.report.to_json() == small_run.report.to_json()


def test_report_json_round_trip_and_text(small_run):
    report = small_run.report
    assert ScenarioReport.from_dict(report.to_dict()) == report
    text = report.render_text()
    assert text.count("Attack: ") == 3
    assert text.count("Pre-attack") == 3


def test_adversarial_arrays_respect_box(small_run):
    for (name, condition), X in small_run.adversarial.items():
        assert X.shape[1] == 8
        assert X.min() >= 0.0 and X.max() <= 1.0
        assert condition in small_run.labels


def test_reuse_day_n_testset_shares_labels():
    run = execute_scenario(dataclasses.replace(SMALL, reuse_day_n_testset=True, attacks_enabled=("fgsm",)))
    np.testing.assert_array_equal(run.labels["day_n"], run.labels["day_n_plus_1"])


def test_malicious_only_leaves_benign_rows(small_run):
    run = execute_scenario(dataclasses.replace(SMALL, malicious_only=True, attacks_enabled=("pgd",)))
    y = run.labels["day_n"]
    X_adv = run.adversarial[("pgd", "day_n")]
    # the unperturbed day-n test set, taken from a zero-budget run
    clean = execute_scenario(dataclasses.replace(
        SMALL, attacks_enabled=("fgsm",), fgsm=dataclasses.replace(SMALL.fgsm, epsilon=0.0)))
    X_clean = clean.adversarial[("fgsm", "day_n")]
    np.testing.assert_array_equal(X_adv[y == 0], X_clean[y == 0])
    assert not np.array_equal(X_adv[y == 1], X_clean[y == 1])


def test_immutable_feature_never_moves(small_run):
    name = small_run.pipeline.selected[0]
    run = execute_scenario(dataclasses.replace(SMALL, immutable_features=(name,), attacks_enabled=("pgd",)))
    clean = execute_scenario(dataclasses.replace(
        SMALL, attacks_enabled=("fgsm",), fgsm=dataclasses.replace(SMALL.fgsm, epsilon=0.0)))
    np.testing.assert_array_equal(run.adversarial[("pgd", "day_n")][:, 0],
                                  clean.adversarial[("fgsm", "day_n")][:, 0])


def test_csv_source_matches_synthetic(tmp_path, small_run):
    for ds in generate_synthetic_days(SMALL.data):
        write_day_csv(ds, tmp_path / f"day_{ds.day_index}.csv")
    report = run_temporal_scenario(dataclasses.replace(SMALL, data=CsvSource(str(tmp_path))))
    assert report.rows == small_run.report.rows


def test_missing_csv_day_is_a_scenario_error(tmp_path):
    with pytest.raises(ScenarioError) as info:
        execute_scenario(dataclasses.replace(SMALL, data=CsvSource(str(tmp_path))))
    assert info.value.stage == "load"


def test_k_larger_than_features_is_a_pipeline_error():
    with pytest.raises(ScenarioError) as info:
        execute_scenario(dataclasses.replace(SMALL, k=40))
    assert info.value.stage == "pipeline"


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(attacks_enabled=())
    with pytest.raises(ValueError):
        ScenarioConfig(attacks_enabled=("cw",))
    with pytest.raises(ValueError):
        ScenarioConfig(start_day=1)  # default stream has only two days


def test_resolved_derives_seeds_and_orders_attacks():
    cfg = dataclasses.replace(SMALL, attacks_enabled=("lowprofool", "fgsm"), seed=11).resolved()
    assert cfg.forest.seed == cfg.train.seed == cfg.pgd.seed == 11
    assert cfg.attacks_enabled == ("fgsm", "lowprofool")


def test_config_dict_round_trip():
    cfg = dataclasses.replace(SMALL, immutable_features=("f1",)).resolved()
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    csv_cfg = dataclasses.replace(SMALL, data=CsvSource("/data", "Class"))
    assert ScenarioConfig.from_dict(csv_cfg.to_dict()) == csv_cfg


def test_ini_defaults_and_overrides():
    assert parse_ini("") == ScenarioConfig()
    cfg = parse_ini("""
[data]
records_per_day = 800
[pipeline]
k = 16
[train]
optimizer = sgd
[attacks]
enabled = pgd, fgsm
pgd_epsilon = 0.2
immutable_features = f0, f3
malicious_only = yes
[scenario]
seed = 7
""")
    assert cfg.data.records_per_day == 800 and cfg.data.seed == 7
    assert cfg.k == 16 and cfg.train.optimizer == "sgd"
    assert cfg.attacks_enabled == ("pgd", "fgsm")
    assert cfg.pgd.epsilon == 0.2 and cfg.pgd.step_size == pytest.approx(0.05)
    assert cfg.immutable_features == ("f0", "f3") and cfg.malicious_only


@pytest.mark.parametrize("text", [
    "[nonsense]\nx = 1\n",
    "[pipeline]\nk = many\n",
    "[data]\nsource = parquet\n",
    "[data]\nsource = csv\n",
    "[attacks]\nenabled = cw\n",
    "[train]\nepochs = 0\n",
    "not an ini",
])
def test_ini_errors(text):
    with pytest.raises(ConfigError):
        parse_ini(text)


def test_load_config_reads_manifest_json(tmp_path):
    import json
    path = tmp_path / "manifest.json"
    cfg = SMALL.resolved()
    path.write_text(json.dumps({"resolved_config": cfg.to_dict(), "tool_version": "x"}))
    assert load_config(path) == cfg
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    with pytest.raises(ConfigError):
        load_config(bad)
