"""Command line behaviour: argument handling, exit codes, end-to-end flows."""

import csv
import json

import pytest

from dpdpsim.cli import CONFIG_ERROR, RUNTIME_ERROR, main, parse_seeds
from dpdpsim.generate import load_scenario, save_scenario


def test_parse_seeds():
    assert parse_seeds("7") == [7]
    assert parse_seeds("0..3") == [0, 1, 2, 3]
    assert parse_seeds("5..5") == [5]
    with pytest.raises(ValueError, match="empty seed range"):
        parse_seeds("4..2")
    with pytest.raises(ValueError):
        parse_seeds("abc")


def test_gen_writes_scenario(tmp_path, capsys):
    out = tmp_path / "s.json"
    code = main(["gen", "--preset", "synth-S", "--seed", "9", "--out", str(out)])
    assert code == 0
    assert "synth-S#9" in capsys.readouterr().out
    scenario = load_scenario(out)
    assert scenario.name == "synth-S#9"
    assert scenario.request_count == 110


def test_gen_unknown_preset_is_config_error(tmp_path, capsys):
    code = main(["gen", "--preset", "mystery", "--out", str(tmp_path / "s.json")])
    assert code == CONFIG_ERROR
    assert "unknown preset" in capsys.readouterr().err


def test_gen_unwritable_path_is_config_error(tmp_path, capsys):
    code = main(
        ["gen", "--preset", "synth-S", "--out", str(tmp_path / "no" / "dir" / "s.json")]
    )
    assert code == CONFIG_ERROR
    assert "cannot write" in capsys.readouterr().err


def test_run_prints_csv(tmp_path, two_station_scenario, capsys):
    path = tmp_path / "pair.json"
    save_scenario(two_station_scenario(appear=0), path)
    code = main(
        ["run", "--scenario", str(path), "--policy", "nearest", "--seeds", "0..2"]
    )
    assert code == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0][0] == "scenario"
    assert len(rows) == 1 + 3 + 2


def test_run_writes_table_and_applies_config(tmp_path, two_station_scenario, capsys):
    scenario_path = tmp_path / "pair.json"
    save_scenario(two_station_scenario(appear=0, horizon=6), scenario_path)
    cfg = tmp_path / "overrides.cfg"
    cfg.write_text("rh.horizon=4\nrh.replan=2\nsa.max_iters=60\n")
    out = tmp_path / "table.md"
    code = main(
        [
            "run",
            "--scenario", str(scenario_path),
            "--policy", "sa-rh",
            "--seeds", "0",
            "--format", "markdown",
            "--config", str(cfg),
            "--out", str(out),
        ]
    )
    assert code == 0
    assert "wrote 1 rows" in capsys.readouterr().out
    assert out.read_text().startswith("| scenario |")


def test_run_missing_scenario_file_is_config_error(tmp_path, capsys):
    code = main(
        ["run", "--scenario", str(tmp_path / "missing.json"), "--policy", "nearest", "--seeds", "0"]
    )
    assert code == CONFIG_ERROR


def test_run_corrupt_scenario_file_is_config_error(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"format": "other"}))
    code = main(["run", "--scenario", str(path), "--policy", "nearest", "--seeds", "0"])
    assert code == CONFIG_ERROR
    assert "not a scenario file" in capsys.readouterr().err


def test_run_bad_seed_range_is_config_error(tmp_path, capsys):
    code = main(["run", "--preset", "synth-S", "--policy", "nearest", "--seeds", "9..1"])
    assert code == CONFIG_ERROR


def test_argparse_rejections_use_exit_code_2(capsys):
    # argparse exits on its own for unknown flags and bad choices; the
    # contract is the same code paths shared with ConfigError.
    with pytest.raises(SystemExit) as e:
        main(["run", "--preset", "synth-S", "--policy", "wizard", "--seeds", "0"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_serve_bad_transport_is_config_error(capsys):
    assert main(["serve", "--transport", "carrier-pigeon"]) == CONFIG_ERROR
    assert main(["serve", "--transport", "tcp:not-a-port"]) == CONFIG_ERROR


def test_runtime_failures_exit_3(tmp_path, monkeypatch, capsys):
    import dpdpsim.cli as cli

    def boom(config):
        raise RuntimeError("worker crashed")

    monkeypatch.setattr(cli, "run_benchmark", boom)
    code = main(["run", "--preset", "synth-S", "--policy", "nearest", "--seeds", "0"])
    assert code == RUNTIME_ERROR
    assert "worker crashed" in capsys.readouterr().err
