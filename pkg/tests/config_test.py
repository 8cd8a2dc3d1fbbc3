"""Run configuration tests."""

import json

import pytest

from strategyrl.config import BcConfig, DystilConfig, PpoConfig, build_run_config, load_run_config
from strategyrl.const import (
    DEFAULT_BC_LEARNING_RATE,
    DEFAULT_PPO_LEARNING_RATE,
    ENV_DYNAMIC_OBSTACLES,
    ENV_KEY_CORRIDOR,
    MODE_DYSTIL,
    MODE_NO_STRATEGY,
)
from strategyrl.error import ConfigError


def test_defaults():
    config = build_run_config()
    assert config.env.env_kind == ENV_DYNAMIC_OBSTACLES
    assert config.env.max_steps == 144
    assert config.seed == 0
    assert config.history == 2
    assert config.bc.learning_rate == DEFAULT_BC_LEARNING_RATE
    assert config.ppo.learning_rate == DEFAULT_PPO_LEARNING_RATE
    assert (config.ppo.gamma, config.ppo.gae_lambda, config.ppo.clip_eps) == (0.99, 0.95, 0.2)
    assert config.ppo.buffer_size == 4 * 128
    # 10000 frames need a 20th buffer of 512
    assert config.ppo.buffers_for_budget == 20
    assert config.dystil.mode == MODE_DYSTIL
    assert config.dystil.n_epochs is None



def test_buffer_budget_rounds_up():
    assert PpoConfig(num_workers=2, frames_per_worker=8, total_frames=32).buffers_for_budget == 2
    assert PpoConfig(num_workers=2, frames_per_worker=8, total_frames=33).buffers_for_budget == 3
    assert PpoConfig(num_workers=2, frames_per_worker=8, total_frames=1).buffers_for_budget == 1

def test_overrides_win_over_the_document():
    config = build_run_config(
        {"env": {"env_kind": ENV_DYNAMIC_OBSTACLES, "seed": 3}},
        {"env": {"seed": 9, "env_kind": ENV_KEY_CORRIDOR}, "dystil": {"mode": "no-strategy"}, "run": {"out_dir": None}},
    )
    assert config.seed == 9
    assert config.env.env_kind == ENV_KEY_CORRIDOR
    assert config.env.max_steps == 60
    assert config.dystil.mode == MODE_NO_STRATEGY
    assert config.out_dir == "run"


@pytest.mark.parametrize(
    "data",
    [
        {"env": {"env_kind": "CrossingS9N1"}},
        {"env": {"history": -1}},
        {"ppo": {"gamma": 0}},
        {"ppo": {"clip_eps": 0}},
        {"ppo": {"num_workers": 0}},
        {"dystil": {"mode": "sometimes"}},
        {"dystil": {"k": 0}},
        {"llm": {"mode": "psychic"}},
        {"llm": {"base_url": "not a url"}},
        {"unknown": {}},
    ],
)
def test_invalid_documents(data):
    with pytest.raises(ConfigError):
        build_run_config(data)


def test_dataclass_validation():
    with pytest.raises(ConfigError):
        PpoConfig(gae_lambda=1.5)
    with pytest.raises(ConfigError):
        BcConfig(epochs=0)
    with pytest.raises(ConfigError):
        DystilConfig(eval_episodes=0)


def test_snapshot_round_trip(tmp_path):
    config = build_run_config({"ppo": {"num_workers": 2}, "dystil": {"k": 4}})
    path = tmp_path / "config.json"
    path.write_text(config.snapshot())
    assert load_run_config(path) == config
    assert json.loads(config.snapshot())["ppo"]["num_workers"] == 2


def test_load_errors(tmp_path):
    assert load_run_config(None) == build_run_config()
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ConfigError):
        load_run_config(broken)
    with pytest.raises(OSError):
        load_run_config(tmp_path / "missing.json")
