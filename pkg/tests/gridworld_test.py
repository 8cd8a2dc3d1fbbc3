"""Gridworld tests."""

import numpy as np
import pytest

from strategyrl.const import (
    ENV_DYNAMIC_OBSTACLES,
    ENV_KEY_CORRIDOR,
    ENV_KINDS,
    ENV_PUT_NEXT,
    ENV_UNLOCK_PICKUP,
    VIEW_SIZE,
)
from strategyrl.error import ConfigError, EpisodeFinishedError, RewardError, UnknownEnvKindError
from strategyrl.gridworld import (
    DOOR_LOCKED,
    DOOR_OPEN,
    GOAL,
    OBJ_BALL,
    OBJ_DOOR,
    OBJ_GOAL,
    OBJ_KEY,
    OBSTACLE,
    WALL,
    Direction,
    EnvConfig,
    Outcome,
    WorldObj,
    action_by_name,
    action_set,
    compute_reward,
    observe,
    oracle_action,
    reset,
    step,
)
from .fakes import clear_obstacles


def _act(env_kind, name):
    return action_by_name(env_kind, name)


@pytest.mark.parametrize("max_steps", [60, 144])
def test_success_reward_formula(max_steps):
    for steps in range(1, max_steps + 1):
        assert compute_reward(steps, max_steps, Outcome.SUCCESS) == 1 - 0.9 * (steps / max_steps)


def test_reward_examples():
    assert compute_reward(30, 60, Outcome.SUCCESS) == pytest.approx(0.55)
    assert compute_reward(60, 60, Outcome.SUCCESS) == pytest.approx(0.1)
    assert compute_reward(3, 144, Outcome.COLLISION) == -1.0
    assert compute_reward(60, 60, Outcome.FAILURE) == 0.0
    assert compute_reward(5, 60, "success") == compute_reward(5, 60, Outcome.SUCCESS)


def test_reward_errors():
    with pytest.raises(RewardError):
        compute_reward(0, 60, Outcome.SUCCESS)
    with pytest.raises(RewardError):
        compute_reward(61, 60, Outcome.SUCCESS)


def test_env_config_defaults_and_errors():
    assert EnvConfig(ENV_DYNAMIC_OBSTACLES).max_steps == 144
    assert EnvConfig(ENV_UNLOCK_PICKUP).max_steps == 60
    assert EnvConfig(ENV_UNLOCK_PICKUP, seed=3).with_seed(7).seed == 7
    with pytest.raises(UnknownEnvKindError):
        EnvConfig("CrossingS9N1")
    with pytest.raises(ConfigError):
        EnvConfig(ENV_PUT_NEXT, max_steps=0)


def test_action_sets():
    assert [a.name for a in action_set(ENV_DYNAMIC_OBSTACLES)] == ["left turn", "right turn", "move forward"]
    assert [a.index for a in action_set(ENV_KEY_CORRIDOR)] == list(range(6))
    with pytest.raises(ValueError):
        action_by_name(ENV_DYNAMIC_OBSTACLES, "pickup")


@pytest.mark.parametrize("env_kind", ENV_KINDS)
def test_reset_is_deterministic(env_kind):
    first, first_obs = reset(EnvConfig(env_kind, seed=11))
    second, second_obs = reset(EnvConfig(env_kind, seed=11))
    assert first.cells == second.cells
    assert first.agent_pos == second.agent_pos
    assert first.agent_dir == second.agent_dir
    assert first.mission == second.mission
    assert first_obs == second_obs

    layouts = {str(reset(EnvConfig(env_kind, seed=seed))[0].cells) for seed in range(6)}
    assert len(layouts) > 1


def test_dynamic_obstacles_layout():
    state, obs = reset(EnvConfig(ENV_DYNAMIC_OBSTACLES, seed=4))
    assert (state.width, state.height) == (6, 6)
    assert state.agent_pos == (1, 1)
    assert state.agent_dir == Direction.E
    assert state.get(4, 4) == GOAL
    assert len(state.obstacle_positions) == 3
    assert state.agent_pos not in state.obstacle_positions
    assert all(state.get(x, y) == OBSTACLE for x, y in state.obstacle_positions)
    assert obs.mission == "get to the green goal square"


def test_unlock_pickup_layout():
    state, _ = reset(EnvConfig(ENV_UNLOCK_PICKUP, seed=2))
    door_pos = state.find(OBJ_DOOR)
    door = state.get(*door_pos)
    assert door_pos[0] == 5
    assert door.state == DOOR_LOCKED
    assert state.find(OBJ_KEY, door.color) is not None
    assert state.agent_pos[0] < 5
    assert state.mission == f"pick up the {state.task.target[1]} box"


def test_out_of_bounds_reads_as_wall():
    state, _ = reset(EnvConfig(ENV_DYNAMIC_OBSTACLES))
    assert state.get(-1, 3) == WALL
    assert state.get(3, 6) == WALL


def test_forward_into_obstacle_collides(dynobs_config):
    state, _ = reset(dynobs_config)
    clear_obstacles(state)
    state.set(2, 1, OBSTACLE)
    state.obstacle_positions = [(2, 1)]

    _, _, reward, terminated, truncated = step(state, _act(ENV_DYNAMIC_OBSTACLES, "move forward"))
    assert reward == -1.0
    assert terminated and not truncated
    assert state.agent_pos == (1, 1)
    assert state.result.outcome == Outcome.COLLISION
    with pytest.raises(EpisodeFinishedError):
        step(state, _act(ENV_DYNAMIC_OBSTACLES, "left turn"))


def test_turning_next_to_obstacle_is_safe(dynobs_config):
    state, _ = reset(dynobs_config)
    clear_obstacles(state)
    state.set(2, 1, OBSTACLE)
    state.obstacle_positions = [(2, 1)]

    _, _, reward, terminated, _ = step(state, _act(ENV_DYNAMIC_OBSTACLES, "right turn"))
    assert reward == 0.0
    assert not terminated
    assert state.agent_dir == Direction.S


def test_reaching_goal_succeeds(dynobs_config):
    state, _ = reset(dynobs_config)
    clear_obstacles(state)
    state.agent_pos, state.agent_dir = (4, 3), Direction.S

    _, _, reward, terminated, _ = step(state, _act(ENV_DYNAMIC_OBSTACLES, "move forward"))
    assert terminated
    assert reward == 1 - 0.9 * (1 / 30)
    assert state.result.success


def test_timeout_truncates():
    state, _ = reset(EnvConfig(ENV_DYNAMIC_OBSTACLES, max_steps=3))
    clear_obstacles(state)
    left = _act(ENV_DYNAMIC_OBSTACLES, "left turn")
    assert step(state, left)[3:] == (False, False)
    assert step(state, left)[3:] == (False, False)
    _, _, reward, terminated, truncated = step(state, left)
    assert (reward, terminated, truncated) == (0.0, False, True)
    assert state.result.outcome == Outcome.FAILURE
    assert state.agent_dir == Direction.S


def test_turns_cycle_headings():
    state, _ = reset(EnvConfig(ENV_DYNAMIC_OBSTACLES, max_steps=10))
    clear_obstacles(state)
    step(state, _act(ENV_DYNAMIC_OBSTACLES, "left turn"))
    assert state.agent_dir == Direction.N
    step(state, _act(ENV_DYNAMIC_OBSTACLES, "right turn"))
    step(state, _act(ENV_DYNAMIC_OBSTACLES, "right turn"))
    assert state.agent_dir == Direction.S


def test_pickup_and_drop():
    state, _ = reset(EnvConfig(ENV_UNLOCK_PICKUP, seed=0))
    ball = WorldObj(OBJ_BALL, "red")
    state.agent_pos, state.agent_dir = (2, 2), Direction.E
    state.set(2, 2, None)
    state.set(3, 2, ball)

    step(state, _act(ENV_UNLOCK_PICKUP, "pickup"))
    assert state.carried == ball
    assert state.get(3, 2) is None

    step(state, _act(ENV_UNLOCK_PICKUP, "drop"))
    assert state.carried is None
    assert state.get(3, 2) == ball


def test_walls_block_movement():
    state, _ = reset(EnvConfig(ENV_DYNAMIC_OBSTACLES, max_steps=10))
    clear_obstacles(state)
    state.agent_dir = Direction.N
    step(state, _act(ENV_DYNAMIC_OBSTACLES, "move forward"))
    assert state.agent_pos == (1, 1)


def _facing_locked_door(seed=0):
    state, _ = reset(EnvConfig(ENV_UNLOCK_PICKUP, seed=seed))
    door_x, door_y = state.find(OBJ_DOOR)
    state.set(door_x - 1, door_y, None)
    state.agent_pos, state.agent_dir = (door_x - 1, door_y), Direction.E
    return state, (door_x, door_y)


def test_locked_door_needs_matching_key():
    state, door_pos = _facing_locked_door()
    toggle = _act(ENV_UNLOCK_PICKUP, "toggle")
    color = state.get(*door_pos).color

    step(state, toggle)
    assert state.get(*door_pos).state == DOOR_LOCKED

    other = next(c for c in ("red", "green", "blue") if c != color)
    state.carried = WorldObj(OBJ_KEY, other)
    step(state, toggle)
    assert state.get(*door_pos).state == DOOR_LOCKED

    state.carried = WorldObj(OBJ_KEY, color)
    step(state, toggle)
    assert state.get(*door_pos).state == DOOR_OPEN
    assert state.carried == WorldObj(OBJ_KEY, color)

    step(state, _act(ENV_UNLOCK_PICKUP, "move forward"))
    assert state.agent_pos == door_pos


def test_observation_of_empty_room():
    state, _ = reset(EnvConfig(ENV_DYNAMIC_OBSTACLES, seed=0))
    clear_obstacles(state)
    obs = observe(state)

    assert obs.view[6][3] is None
    assert obs.visible[6][3]
    # forward three cells, right three cells
    assert obs.view[3][6].kind == OBJ_GOAL
    assert obs.view[6][2] == WALL
    assert obs.view[2][3] == WALL
    assert obs.carried is None


def test_walls_hide_what_is_behind():
    state, _ = reset(EnvConfig(ENV_DYNAMIC_OBSTACLES, seed=0))
    clear_obstacles(state)
    state.agent_dir = Direction.N
    obs = observe(state)
    assert obs.view[5][3] == WALL
    assert not obs.visible[4][3]
    assert obs.view[4][3] is None


def _see_through(cell):
    return cell is None or cell.see_behind


@pytest.mark.parametrize("env_kind", ENV_KINDS)
def test_random_rollouts_keep_invariants(env_kind):
    actions = action_set(env_kind)
    rng = np.random.default_rng(5)
    for seed in range(4):
        state, obs = reset(EnvConfig(env_kind, seed=seed))
        objects = state.object_count()
        while True:
            for j in range(VIEW_SIZE):
                for i in range(VIEW_SIZE):
                    if not obs.visible[j][i] or (j, i) == (VIEW_SIZE - 1, VIEW_SIZE // 2):
                        continue
                    sources = [(j + 1, i - 1), (j + 1, i), (j + 1, i + 1), (j, i - 1), (j, i + 1)]
                    assert any(
                        0 <= sj < VIEW_SIZE
                        and 0 <= si < VIEW_SIZE
                        and obs.visible[sj][si]
                        and _see_through(obs.view[sj][si])
                        for sj, si in sources
                    ), (env_kind, seed, j, i)

            state, obs, reward, terminated, truncated = step(state, actions[int(rng.integers(len(actions)))])
            assert state.object_count() == objects
            if not (terminated or truncated):
                assert reward == 0.0
                continue
            if state.result.success:
                assert 0.0 < reward <= 1.0
            else:
                assert reward <= 0.0
            break


def test_oracle_walks_toward_goal_ahead(dynobs_config):
    state, _ = reset(dynobs_config)
    clear_obstacles(state)
    state.agent_pos, state.agent_dir = (4, 3), Direction.S
    assert oracle_action(state).name == "move forward"


def test_oracle_turns_toward_goal_on_the_left(dynobs_config):
    state, _ = reset(dynobs_config)
    clear_obstacles(state)
    state.agent_pos, state.agent_dir = (4, 3), Direction.W
    assert oracle_action(state).name == "left turn"


def test_oracle_solves_dynamic_obstacles():
    successes = 0
    for seed in range(100):
        state, _ = reset(EnvConfig(ENV_DYNAMIC_OBSTACLES, seed=seed))
        while not state.finished:
            step(state, oracle_action(state))
        successes += state.result.success
    assert successes >= 95


def test_key_corridor_mission_names_the_locked_ball():
    for seed in range(10):
        state, obs = reset(EnvConfig(ENV_KEY_CORRIDOR, seed=seed))
        kind, color = state.task.target
        assert kind == OBJ_BALL
        assert obs.mission == f"pick up the {color} ball"
        ball_x, ball_y = state.find(OBJ_BALL, color)
        door = state.get(ball_x - 1, ball_y)
        assert door.kind == OBJ_DOOR and door.state == DOOR_LOCKED
        assert state.find(OBJ_KEY, door.color) is not None


def test_put_next_mission_names_target_and_anchor():
    for seed in range(10):
        state, obs = reset(EnvConfig(ENV_PUT_NEXT, seed=seed))
        (target_kind, target_color), (anchor_kind, anchor_color) = state.task.target, state.task.anchor
        assert obs.mission == f"put the {target_color} {target_kind} next to the {anchor_color} {anchor_kind}"
        target_x, _ = state.find(target_kind, target_color)
        anchor_x, _ = state.find(anchor_kind, anchor_color)
        # the two objects start in different rooms
        assert (target_x < 4) != (anchor_x < 4)
