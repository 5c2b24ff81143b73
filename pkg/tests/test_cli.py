import json

import numpy as np
import pytest

from netgee import dataio, fixtures
from netgee.cli import main
from netgee.config import StudyConfig, load_config
from netgee.errors import ConfigError
from netgee.features import ALL_COLUMNS, compute_features
from netgee.netgen import generate_cluster_set
from netgee.study import Scenario


def test_config_load_and_unknown_keys(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(
        "[study]\nmaster_seed = 5\nscenarios = [\"000001\"]\nreplicates = 3\n"
        "[netgen]\nm_clusters = 6\nsize_min = 20\nsize_max = 30\n"
    )
    cfg = load_config(path)
    assert cfg.master_seed == 5
    assert cfg.scenario_bits() == ("000001",)
    bad = tmp_path / "bad.toml"
    bad.write_text("[study]\nnot_a_key = 1\n")
    with pytest.raises(ConfigError, match="not_a_key"):
        load_config(bad)


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("NETGEE_THREADS", "3")
    assert StudyConfig().resolved_threads() == 3
    monkeypatch.setenv("NETGEE_THREADS", "zow")
    with pytest.raises(ConfigError):
        StudyConfig().resolved_threads()


def test_netgen_then_features_matches_in_process(tmp_path):
    out = tmp_path / "run"
    rc = main(["--seed", "123", "--out", str(out), "netgen", "--scenario", "000000"])
    assert rc == 0
    rc = main(["--out", str(out), "features", "--data", str(out)])
    assert rc == 0

    config = StudyConfig(master_seed=123)
    scen = Scenario.from_bits("000000")
    nets = generate_cluster_set(
        config.m_clusters,
        (config.size_min, config.size_max),
        scen.degree_spec(config),
        scen.mixing_spec(config),
        scen.rewire_spec(config),
        np.random.SeedSequence(123),
    )
    feats = [compute_features(net, [], columns=ALL_COLUMNS) for net in nets]
    expected = tmp_path / "expected.csv"
    dataio.write_features_csv(expected, feats)
    assert (out / "features.csv").read_bytes() == expected.read_bytes()


def test_estimate_unknown_strategy_exit_2(tmp_path, capsys):
    rc = main(["estimate", "--data", str(tmp_path), "--strategy", "nope"])
    assert rc == 2
    assert "unknown strategy" in capsys.readouterr().err


def test_estimate_missing_data_exit_3(tmp_path):
    rc = main(["estimate", "--data", str(tmp_path / "nowhere"), "--strategy", "none"])
    assert rc == 3


def test_json_error_format(tmp_path, capsys):
    rc = main(
        ["--format", "json", "estimate", "--data", str(tmp_path / "x"), "--strategy", "none"]
    )
    assert rc == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "DataFormatError"


def test_contagion_then_estimate_pipeline(tmp_path):
    out = tmp_path / "nets"
    cfg = tmp_path / "c.toml"
    cfg.write_text("[netgen]\nm_clusters = 12\nsize_min = 40\nsize_max = 60\n")
    assert main(["--config", str(cfg), "--seed", "5", "--out", str(out), "netgen"]) == 0
    assert (
        main(
            [
                "--config", str(cfg), "--seed", "6", "--out", str(out),
                "contagion", "--data", str(out), "--scenario", "000001",
            ]
        )
        == 0
    )
    assert (out / "outcomes.csv").exists()
    rc = main(
        ["--out", str(out), "estimate", "--data", str(out), "--strategy", "none",
         "--strategy", "crude"]
    )
    assert rc == 0
    text = (out / "fit_report.csv").read_text()
    assert "none,exposure," in text and "crude,exposure," in text


def test_fixtures_and_analyze_cli(tmp_path):
    assert main(["--out", str(tmp_path), "fixtures"]) == 0
    assert (tmp_path / "toy_2village" / "edges.tsv").exists()
    assert (tmp_path / "configs" / "full64.toml").exists()
    rc = main(
        [
            "--out", str(tmp_path / "analysis"),
            "analyze", "--data", str(tmp_path / "synthetic49"),
            "--exposure", "quartile:leader",
        ]
    )
    assert rc == 0
    report = (tmp_path / "analysis" / "report.csv").read_text()
    for name in ("crude", "gee", "dr_network", "dr_network_socio"):
        assert f"{name},exposure," in report
    assert (tmp_path / "analysis" / "model_tables.csv").exists()


def test_study_cli_smoke(tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text(
        "[study]\nmaster_seed = 99\nscenarios = [\"000001\"]\nreplicates = 2\n"
        "strategies = [\"none\", \"x9\"]\nthreads = 2\n"
        "[netgen]\nm_clusters = 8\nsize_min = 30\nsize_max = 50\n"
    )
    out = tmp_path / "study_out"
    assert main(["--config", str(cfg), "--out", str(out), "study"]) == 0
    assert (out / "estimates.csv").exists()
    assert (out / "metrics.csv").exists()
    assert (out / "resolved_config.json").exists()
    rows = dataio.read_estimates_csv(out / "estimates.csv")
    # none + x9 + auto-added oracle, two replicates
    assert len(rows) == 6
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["master_seed"] == 99
