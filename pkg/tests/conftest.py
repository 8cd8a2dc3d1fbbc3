"""pytest fixtures."""

import json
from pathlib import Path

import pytest

from strategyrl.config import build_run_config
from strategyrl.const import ENV_DYNAMIC_OBSTACLES
from strategyrl.dystil import build_agent
from strategyrl.gridworld import EnvConfig, action_by_name
from strategyrl.strategy import StrategyList
from strategyrl.textgen import TextObservation
from strategyrl.trajectory import Demonstration, PseudoState, record_demonstrations

FIXTURES = Path(__file__).parent / "fixtures"

GOAL = "get to the green goal square"


def read_fixture(name: str) -> str:
    with open(FIXTURES / name, newline="") as fixturefile:
        return fixturefile.read()


def mock_script(*responses: str) -> str:
    """Mock LLM script text answering with the given responses in order."""
    return "".join(json.dumps(response) + "\n" for response in responses)


@pytest.fixture
def dynobs_config():
    return EnvConfig(ENV_DYNAMIC_OBSTACLES, seed=0, max_steps=30)


@pytest.fixture(scope="session")
def recorded_demos():
    """Two oracle demonstrations on DynamicObstacles6x6, shared by the slow-ish tests."""
    return record_demonstrations(EnvConfig(ENV_DYNAMIC_OBSTACLES, seed=0, max_steps=30), 2)


@pytest.fixture
def handmade_demo():
    """A short demonstration written out by hand, independent of the oracle."""
    forward = action_by_name(ENV_DYNAMIC_OBSTACLES, "move forward")
    right = action_by_name(ENV_DYNAMIC_OBSTACLES, "right turn")
    first = TextObservation(
        ("You see a wall 1 step left", "You see a green goal 3 steps right and 3 steps forward"), GOAL
    )
    second = TextObservation(("You see a wall 3 steps forward",), GOAL)
    return Demonstration(
        env_kind=ENV_DYNAMIC_OBSTACLES,
        seed=0,
        goal=GOAL,
        steps=((first, forward), (second, right)),
        episode_return=0.9,
        max_steps=144,
    )


@pytest.fixture
def handmade_pair(handmade_demo):
    """(pseudo-state, action, advantage) built from the handmade demonstration."""
    (first, forward), (second, right) = handmade_demo.steps
    return PseudoState(history=((first, forward),), current=second, goal=GOAL), right, -0.25


@pytest.fixture
def short_strategies():
    return StrategyList.of([("Avoid obstacles", "Turn when a ball is directly in front.")], version=1)


@pytest.fixture
def initial_strategies_text():
    return read_fixture("initial_strategies.txt")


@pytest.fixture
def agent():
    return build_agent(ENV_DYNAMIC_OBSTACLES, history=2, seed=0)


@pytest.fixture
def tiny_run_config(tmp_path):
    """Run configuration small enough for unit tests."""
    return build_run_config(
        {
            "env": {"env_kind": ENV_DYNAMIC_OBSTACLES, "seed": 0, "max_steps": 30, "num_demos": 2},
            "bc": {"epochs": 1, "batch_size": 8},
            "ppo": {"num_workers": 2, "frames_per_worker": 8, "epochs": 1, "batch_size": 8},
            "dystil": {"k": 3, "n_epochs": 3, "eval_episodes": 2},
            "run": {"out_dir": str(tmp_path / "run"), "validation_episodes": 2, "test_episodes": 3},
        }
    )
