"""Command line tests."""

import json

import pytest

from strategyrl.cli import build_parser, main
from strategyrl.const import ENV_DYNAMIC_OBSTACLES
from strategyrl.harness import RunDirectory
from strategyrl.trajectory import read_demonstrations
from strategyrl.util import get_version, read_csv
from .conftest import mock_script

TINY_CONFIG = {
    "env": {"env_kind": ENV_DYNAMIC_OBSTACLES, "seed": 0, "max_steps": 30, "num_demos": 2},
    "bc": {"epochs": 1, "batch_size": 8},
    "ppo": {"num_workers": 2, "frames_per_worker": 8, "epochs": 1, "batch_size": 8},
    "dystil": {"k": 3, "n_epochs": 1, "eval_episodes": 2},
    "run": {"validation_episodes": 2, "test_episodes": 3},
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return str(path)


@pytest.fixture
def script_file(tmp_path):
    path = tmp_path / "script.jsonl"
    path.write_text(
        mock_script("1. Avoid obstacles:\n  - Turn early.", "1. Avoid obstacles:\n  - Turn early.\n2. Keep going:")
    )
    return str(path)


def test_version(capsys):
    with pytest.raises(SystemExit) as err:
        build_parser().parse_args(["--version"])
    assert err.value.code == 0
    assert get_version() in capsys.readouterr().out


def test_record_demos(tmp_path, config_file):
    out_dir = tmp_path / "run"
    assert main(["record-demos", "--config", config_file, "--out-dir", str(out_dir)]) == 0
    demos = read_demonstrations(RunDirectory(out_dir).demos)
    assert len(demos) == 2


def test_train_without_strategies(tmp_path, config_file, capsys):
    out_dir = tmp_path / "run"
    assert main(["train", "--mode", "no-strategy", "--config", config_file, "--out-dir", str(out_dir)]) == 0
    run_dir = RunDirectory(out_dir)
    assert "0 LLM calls" in capsys.readouterr().out
    assert json.loads(run_dir.config_snapshot.read_text())["dystil"]["mode"] == "no_strategy"
    assert [row["stage"] for row in read_csv(run_dir.train_csv)] == ["bc", "no_strategy"]
    assert not run_dir.llm_audit.exists()


def test_train_inspect_and_eval(tmp_path, config_file, script_file, capsys):
    out_dir = str(tmp_path / "run")
    common = ["--config", config_file, "--out-dir", out_dir]
    assert main(["train", "--mock", script_file, *common]) == 0
    assert "2 LLM calls" in capsys.readouterr().out
    run_dir = RunDirectory(out_dir)
    assert len(run_dir.llm_audit.read_text().splitlines()) == 2

    assert main(["inspect-strategies", out_dir]) == 0
    log = capsys.readouterr().out
    assert log.startswith("Epoch 0 (initial), version 1\n")
    assert "Epoch 1:" in log

    assert main(["eval", "--episodes", "2", *common]) == 0
    assert "over 2" in capsys.readouterr().out
    assert json.loads(run_dir.eval_report.read_text())["n_episodes"] == 2


def test_induce_writes_output(tmp_path, config_file, script_file, capsys):
    output = tmp_path / "strategies.txt"
    out_dir = str(tmp_path / "run")
    argv = ["induce", "--mock", script_file, "--output", str(output), "--config", config_file, "--out-dir", out_dir]
    assert main(argv) == 0
    assert output.read_text() == "1. Avoid obstacles:\n  - Turn early.\n"
    assert capsys.readouterr().out == "1. Avoid obstacles:\n  - Turn early.\n"


def test_errors_exit_with_status_one(tmp_path, config_file):
    assert main(["eval", "--config", config_file, "--out-dir", str(tmp_path / "empty")]) == 1

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"ppo": {"gamma": 2.0}}))
    assert main(["train", "--config", str(bad), "--out-dir", str(tmp_path / "run")]) == 1

    assert main(["inspect-strategies", str(tmp_path / "nowhere")]) == 1
