"""Seedable, partially observable gridworlds with egocentric 7x7 views."""

import copy
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Any, Callable, Optional

import numpy as np

from .const import (
    ACTION_DROP,
    ACTION_FORWARD,
    ACTION_LEFT,
    ACTION_PICKUP,
    ACTION_RIGHT,
    ACTION_TOGGLE,
    DEFAULT_MAX_STEPS,
    DYNAMIC_OBSTACLE_COUNT,
    ENV_ACTIONS,
    ENV_DYNAMIC_OBSTACLES,
    ENV_KEY_CORRIDOR,
    ENV_KINDS,
    ENV_PUT_NEXT,
    ENV_UNLOCK_PICKUP,
    VIEW_SIZE,
)
from .error import ConfigError, EpisodeFinishedError, RewardError, UnknownEnvKindError, UnsolvableLayoutError

_LOGGER = logging.getLogger(__name__)

COLORS = ["red", "green", "blue", "purple", "yellow", "grey"]

OBJ_WALL = "wall"
OBJ_DOOR = "door"
OBJ_KEY = "key"
OBJ_BALL = "ball"
OBJ_BOX = "box"
OBJ_GOAL = "goal"

PICKABLE = (OBJ_KEY, OBJ_BALL, OBJ_BOX)

DOOR_OPEN = "open"
DOOR_CLOSED = "closed"
DOOR_LOCKED = "locked"


class Direction(IntEnum):
    """Agent heading, numbered clockwise from east."""

    E = 0
    S = 1
    W = 2
    N = 3


DIR_TO_VEC = {
    Direction.E: (1, 0),
    Direction.S: (0, 1),
    Direction.W: (-1, 0),
    Direction.N: (0, -1),
}


class Outcome(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    COLLISION = "collision"


@dataclass(frozen=True)
class EpisodeResult:
    """How an episode ended."""

    outcome: Outcome
    steps: int
    reward: float

    @property
    def success(self) -> bool:
        return self.outcome == Outcome.SUCCESS


@dataclass(frozen=True)
class WorldObj:
    """Content of one grid cell; doors carry a state."""

    kind: str
    color: str = "grey"
    state: Optional[str] = None

    @property
    def can_pickup(self) -> bool:
        return self.kind in PICKABLE

    @property
    def can_overlap(self) -> bool:
        return self.kind == OBJ_GOAL or (self.kind == OBJ_DOOR and self.state == DOOR_OPEN)

    @property
    def see_behind(self) -> bool:
        if self.kind == OBJ_WALL:
            return False
        if self.kind == OBJ_DOOR:
            return self.state == DOOR_OPEN
        return True

    def matches(self, kind: str, color: str) -> bool:
        return self.kind == kind and self.color == color

    def to_dict(self) -> dict[str, Any]:
        data = {"kind": self.kind, "color": self.color}
        if self.state is not None:
            data["state"] = self.state
        return data

    @classmethod
    def from_dict(cls, data: Optional[dict[str, Any]]) -> Optional["WorldObj"]:
        if data is None:
            return None
        return cls(kind=data["kind"], color=data.get("color", "grey"), state=data.get("state"))


WALL = WorldObj(OBJ_WALL, "grey")
GOAL = WorldObj(OBJ_GOAL, "green")
OBSTACLE = WorldObj(OBJ_BALL, "blue")


@dataclass(frozen=True)
class EnvConfig:
    env_kind: str
    seed: int = 0
    max_steps: Optional[int] = None

    def __post_init__(self):
        if self.env_kind not in ENV_KINDS:
            raise UnknownEnvKindError(f"Unknown env kind {self.env_kind!r}, expected one of {ENV_KINDS}")
        if self.max_steps is None:
            object.__setattr__(self, "max_steps", DEFAULT_MAX_STEPS[self.env_kind])
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be positive, got {self.max_steps}")

    def with_seed(self, seed: int) -> "EnvConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class Action:
    name: str
    index: int


def action_set(env_kind: str) -> list[Action]:
    """Return the ordered action list of an environment."""
    if env_kind not in ENV_ACTIONS:
        raise UnknownEnvKindError(f"Unknown env kind {env_kind!r}")
    return [Action(name, index) for index, name in enumerate(ENV_ACTIONS[env_kind])]


def action_by_name(env_kind: str, name: str) -> Action:
    for action in action_set(env_kind):
        if action.name == name:
            return action
    raise ValueError(f"{name!r} is not an action of {env_kind}")


@dataclass(frozen=True)
class Task:
    """What counts as success: reach the goal, pick up `target`, or put `target` next to `anchor`."""

    kind: str
    target: Optional[tuple[str, str]] = None
    anchor: Optional[tuple[str, str]] = None


@dataclass
class GridState:
    env_kind: str
    width: int
    height: int
    cells: list[list[Optional[WorldObj]]]
    agent_pos: tuple[int, int]
    agent_dir: Direction
    mission: str
    task: Task
    max_steps: int
    rng: np.random.Generator
    carried: Optional[WorldObj] = None
    step_count: int = 0
    obstacle_positions: list[tuple[int, int]] = field(default_factory=list)
    finished: bool = False
    result: Optional[EpisodeResult] = None

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def get(self, x: int, y: int) -> Optional[WorldObj]:
        if not self.in_bounds(x, y):
            return WALL
        return self.cells[y][x]

    def set(self, x: int, y: int, obj: Optional[WorldObj]) -> None:
        self.cells[y][x] = obj

    @property
    def front_pos(self) -> tuple[int, int]:
        dx, dy = DIR_TO_VEC[self.agent_dir]
        return self.agent_pos[0] + dx, self.agent_pos[1] + dy

    def find(self, kind: str, color: Optional[str] = None) -> Optional[tuple[int, int]]:
        """Position of the first matching object in row-major order."""
        for y in range(self.height):
            for x in range(self.width):
                obj = self.cells[y][x]
                if obj is not None and obj.kind == kind and (color is None or obj.color == color):
                    return x, y
        return None

    def object_count(self) -> int:
        """Number of movable objects, on the grid or carried."""
        count = sum(1 for row in self.cells for obj in row if obj is not None and obj.can_pickup)
        return count + (1 if self.carried is not None else 0)

    def copy(self) -> "GridState":
        return copy.deepcopy(self)


@dataclass(frozen=True)
class Observation:
    """Egocentric view, agent at the bottom-center cell facing up; `visible` is the occlusion mask."""

    view: tuple[tuple[Optional[WorldObj], ...], ...]
    visible: tuple[tuple[bool, ...], ...]
    carried: Optional[WorldObj]
    mission: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "view": [[None if obj is None else obj.to_dict() for obj in row] for row in self.view],
            "visible": [list(row) for row in self.visible],
            "carried": None if self.carried is None else self.carried.to_dict(),
            "mission": self.mission,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Observation":
        return cls(
            view=tuple(tuple(WorldObj.from_dict(obj) for obj in row) for row in data["view"]),
            visible=tuple(tuple(bool(v) for v in row) for row in data["visible"]),
            carried=WorldObj.from_dict(data.get("carried")),
            mission=data["mission"],
        )


def _rand_elem(rng: np.random.Generator, items: list):
    return items[int(rng.integers(len(items)))]


def _empty_grid(width: int, height: int) -> list[list[Optional[WorldObj]]]:
    cells: list[list[Optional[WorldObj]]] = [[None] * width for _ in range(height)]
    for x in range(width):
        cells[0][x] = WALL
        cells[height - 1][x] = WALL
    for y in range(height):
        cells[y][0] = WALL
        cells[y][width - 1] = WALL
    return cells


def _free_cells(cells, x_range, y_range, exclude=()) -> list[tuple[int, int]]:
    return [(x, y) for y in y_range for x in x_range if cells[y][x] is None and (x, y) not in exclude]


def _gen_dynamic_obstacles(rng: np.random.Generator) -> dict[str, Any]:
    size = 6
    cells = _empty_grid(size, size)
    goal_pos = (size - 2, size - 2)
    cells[goal_pos[1]][goal_pos[0]] = GOAL
    agent_pos = (1, 1)
    free = _free_cells(cells, range(1, size - 1), range(1, size - 1), exclude=(agent_pos,))
    picks = rng.choice(len(free), size=DYNAMIC_OBSTACLE_COUNT, replace=False)
    obstacles = [free[int(i)] for i in picks]
    for x, y in obstacles:
        cells[y][x] = OBSTACLE
    return {
        "width": size,
        "height": size,
        "cells": cells,
        "agent_pos": agent_pos,
        "agent_dir": Direction.E,
        "mission": "get to the green goal square",
        "task": Task("reach"),
        "obstacle_positions": obstacles,
    }


def _gen_unlock_pickup(rng: np.random.Generator) -> dict[str, Any]:
    width, height = 11, 6
    cells = _empty_grid(width, height)
    for y in range(height):
        cells[y][5] = WALL
    door_color = _rand_elem(rng, COLORS)
    door_y = int(rng.integers(1, height - 1))
    cells[door_y][5] = WorldObj(OBJ_DOOR, door_color, DOOR_LOCKED)

    box_color = _rand_elem(rng, COLORS)
    box_pos = _rand_elem(rng, _free_cells(cells, range(6, width - 1), range(1, height - 1)))
    cells[box_pos[1]][box_pos[0]] = WorldObj(OBJ_BOX, box_color)

    key_pos = _rand_elem(rng, _free_cells(cells, range(1, 5), range(1, height - 1)))
    cells[key_pos[1]][key_pos[0]] = WorldObj(OBJ_KEY, door_color)

    agent_pos = _rand_elem(rng, _free_cells(cells, range(1, 5), range(1, height - 1)))
    return {
        "width": width,
        "height": height,
        "cells": cells,
        "agent_pos": agent_pos,
        "agent_dir": Direction(int(rng.integers(4))),
        "mission": f"pick up the {box_color} box",
        "task": Task("pickup", target=(OBJ_BOX, box_color)),
    }


def _gen_key_corridor(rng: np.random.Generator) -> dict[str, Any]:
    # 3 columns x 2 rows of 3x3 rooms; the middle column is joined into a corridor
    width, height = 7, 5
    cells: list[list[Optional[WorldObj]]] = [[WALL] * width for _ in range(height)]
    for x in (1, 3, 5):
        for y in (1, 3):
            cells[y][x] = None
    cells[2][3] = None

    door_colors = [COLORS[int(i)] for i in rng.permutation(len(COLORS))[:4]]
    locked_row = int(rng.integers(2))
    locked_color = door_colors[0]
    other_colors = iter(door_colors[1:])
    for row in range(2):
        y = 2 * row + 1
        cells[y][2] = WorldObj(OBJ_DOOR, next(other_colors), DOOR_CLOSED)
        if row == locked_row:
            cells[y][4] = WorldObj(OBJ_DOOR, locked_color, DOOR_LOCKED)
        else:
            cells[y][4] = WorldObj(OBJ_DOOR, next(other_colors), DOOR_CLOSED)

    ball_color = _rand_elem(rng, COLORS)
    cells[2 * locked_row + 1][5] = WorldObj(OBJ_BALL, ball_color)
    key_row = int(rng.integers(2))
    cells[2 * key_row + 1][1] = WorldObj(OBJ_KEY, locked_color)

    agent_pos = _rand_elem(rng, [(3, 1), (3, 2), (3, 3)])
    return {
        "width": width,
        "height": height,
        "cells": cells,
        "agent_pos": agent_pos,
        "agent_dir": Direction(int(rng.integers(4))),
        "mission": f"pick up the {ball_color} ball",
        "task": Task("pickup", target=(OBJ_BALL, ball_color)),
    }


def _gen_put_next(rng: np.random.Generator) -> dict[str, Any]:
    # Two 5x5 rooms with the shared wall removed
    width, height = 9, 5
    cells = _empty_grid(width, height)
    kinds = [(kind, color) for kind in PICKABLE for color in COLORS]
    picks = rng.choice(len(kinds), size=4, replace=False)
    objs = [WorldObj(*kinds[int(i)]) for i in picks]

    left, right = objs[:2], objs[2:]
    for obj in left:
        x, y = _rand_elem(rng, _free_cells(cells, range(1, 4), range(1, height - 1)))
        cells[y][x] = obj
    for obj in right:
        x, y = _rand_elem(rng, _free_cells(cells, range(5, 8), range(1, height - 1)))
        cells[y][x] = obj

    agent_pos = _rand_elem(rng, _free_cells(cells, range(1, 4), range(1, height - 1)))
    moved, fixed = _rand_elem(rng, left), _rand_elem(rng, right)
    if rng.integers(2):
        moved, fixed = fixed, moved
    return {
        "width": width,
        "height": height,
        "cells": cells,
        "agent_pos": agent_pos,
        "agent_dir": Direction(int(rng.integers(4))),
        "mission": f"put the {moved.color} {moved.kind} next to the {fixed.color} {fixed.kind}",
        "task": Task("put_next", target=(moved.kind, moved.color), anchor=(fixed.kind, fixed.color)),
    }


GENERATORS: dict[str, Callable[[np.random.Generator], dict[str, Any]]] = {
    ENV_DYNAMIC_OBSTACLES: _gen_dynamic_obstacles,
    ENV_UNLOCK_PICKUP: _gen_unlock_pickup,
    ENV_KEY_CORRIDOR: _gen_key_corridor,
    ENV_PUT_NEXT: _gen_put_next,
}


def reset(config: EnvConfig) -> tuple[GridState, Observation]:
    """Start an episode; the layout is a deterministic function of (env_kind, seed)."""
    generator = GENERATORS.get(config.env_kind)
    if generator is None:
        raise UnknownEnvKindError(f"Unknown env kind {config.env_kind!r}")
    rng = np.random.default_rng(config.seed)
    layout = generator(rng)
    state = GridState(env_kind=config.env_kind, max_steps=config.max_steps, rng=rng, **layout)
    _LOGGER.debug("Reset %s with seed %s: %s", config.env_kind, config.seed, state.mission)
    return state, observe(state)


def compute_reward(total_steps: int, max_steps: int, outcome: Outcome) -> float:
    """Episode reward: 1 - 0.9 * steps/max on success, 0 on failure, -1 on collision."""
    outcome = Outcome(outcome)
    if total_steps <= 0:
        raise RewardError(f"total_steps must be positive, got {total_steps}")
    if outcome == Outcome.SUCCESS:
        if total_steps > max_steps:
            raise RewardError(f"Success after {total_steps} steps exceeds max_steps {max_steps}")
        return 1 - 0.9 * (total_steps / max_steps)
    if outcome == Outcome.COLLISION:
        return -1.0
    return 0.0


def _move_obstacles(state: GridState) -> None:
    moves = [(0, 0), (0, -1), (1, 0), (0, 1), (-1, 0)]
    for i, (x, y) in enumerate(state.obstacle_positions):
        dx, dy = moves[int(state.rng.integers(len(moves)))]
        nx, ny = x + dx, y + dy
        if (dx, dy) == (0, 0) or not state.in_bounds(nx, ny):
            continue
        if state.get(nx, ny) is not None or (nx, ny) == state.agent_pos:
            continue
        state.set(x, y, None)
        state.set(nx, ny, OBSTACLE)
        state.obstacle_positions[i] = (nx, ny)


def _is_success(state: GridState, dropped: Optional[WorldObj], drop_pos: Optional[tuple[int, int]]) -> bool:
    task = state.task
    if task.kind == "reach":
        cell = state.get(*state.agent_pos)
        return cell is not None and cell.kind == OBJ_GOAL
    if task.kind == "pickup":
        return state.carried is not None and state.carried.matches(*task.target)
    if task.kind == "put_next":
        if dropped is None or not dropped.matches(*task.target):
            return False
        anchor = state.find(*task.anchor)
        return anchor is not None and abs(anchor[0] - drop_pos[0]) + abs(anchor[1] - drop_pos[1]) == 1
    return False


def step(state: GridState, action: Action) -> tuple[GridState, Observation, float, bool, bool]:
    """
    Apply one action.

    The state is advanced in place and returned; use `GridState.copy` to branch.
    """
    if state.finished:
        raise EpisodeFinishedError("Episode already finished, call reset")

    state.step_count += 1
    fx, fy = state.front_pos
    collision = False

    if state.env_kind == ENV_DYNAMIC_OBSTACLES:
        blocked = (fx, fy) in state.obstacle_positions
        _move_obstacles(state)
        collision = action.name == ACTION_FORWARD and blocked

    front = state.get(fx, fy)
    dropped, drop_pos = None, None

    if action.name == ACTION_LEFT:
        state.agent_dir = Direction((state.agent_dir - 1) % 4)
    elif action.name == ACTION_RIGHT:
        state.agent_dir = Direction((state.agent_dir + 1) % 4)
    elif action.name == ACTION_FORWARD:
        if not collision and (front is None or front.can_overlap):
            state.agent_pos = (fx, fy)
    elif action.name == ACTION_PICKUP:
        if state.carried is None and front is not None and front.can_pickup:
            state.carried = front
            state.set(fx, fy, None)
    elif action.name == ACTION_DROP:
        if state.carried is not None and front is None and state.in_bounds(fx, fy):
            dropped, drop_pos = state.carried, (fx, fy)
            state.set(fx, fy, state.carried)
            state.carried = None
    elif action.name == ACTION_TOGGLE:
        if front is not None and front.kind == OBJ_DOOR:
            if front.state == DOOR_OPEN:
                state.set(fx, fy, replace(front, state=DOOR_CLOSED))
            elif front.state == DOOR_CLOSED:
                state.set(fx, fy, replace(front, state=DOOR_OPEN))
            elif state.carried is not None and state.carried.matches(OBJ_KEY, front.color):
                state.set(fx, fy, replace(front, state=DOOR_OPEN))
    else:
        raise ValueError(f"Unknown action {action.name!r}")

    terminated, truncated, outcome = False, False, None
    if collision:
        terminated, outcome = True, Outcome.COLLISION
    elif _is_success(state, dropped, drop_pos):
        terminated, outcome = True, Outcome.SUCCESS
    elif state.step_count >= state.max_steps:
        truncated, outcome = True, Outcome.FAILURE

    reward = 0.0
    if outcome is not None:
        reward = compute_reward(state.step_count, state.max_steps, outcome)
        state.result = EpisodeResult(outcome=outcome, steps=state.step_count, reward=reward)
    state.finished = terminated or truncated
    return state, observe(state), reward, terminated, truncated


def _process_vis(view: list[list[Optional[WorldObj]]]) -> list[list[bool]]:
    """Flood-fill visibility from the agent cell, row by row away from the agent."""
    size = len(view)
    mask = [[False] * size for _ in range(size)]
    mask[size - 1][size // 2] = True
    for j in reversed(range(size)):
        for i in range(size - 1):
            if not mask[j][i]:
                continue
            cell = view[j][i]
            if cell is not None and not cell.see_behind:
                continue
            mask[j][i + 1] = True
            if j > 0:
                mask[j - 1][i + 1] = True
                mask[j - 1][i] = True
        for i in reversed(range(1, size)):
            if not mask[j][i]:
                continue
            cell = view[j][i]
            if cell is not None and not cell.see_behind:
                continue
            mask[j][i - 1] = True
            if j > 0:
                mask[j - 1][i - 1] = True
                mask[j - 1][i] = True
    return mask


def observe(state: GridState) -> Observation:
    """Extract the egocentric 7x7 view with occlusion."""
    size = VIEW_SIZE
    half = size // 2
    fdx, fdy = DIR_TO_VEC[state.agent_dir]
    rdx, rdy = -fdy, fdx
    ax, ay = state.agent_pos

    view: list[list[Optional[WorldObj]]] = [[None] * size for _ in range(size)]
    for vy in range(size):
        for vx in range(size):
            ahead, lateral = size - 1 - vy, vx - half
            view[vy][vx] = state.get(ax + ahead * fdx + lateral * rdx, ay + ahead * fdy + lateral * rdy)
    view[size - 1][half] = None

    mask = _process_vis(view)
    hidden_view = tuple(tuple(view[j][i] if mask[j][i] else None for i in range(size)) for j in range(size))
    return Observation(
        view=hidden_view,
        visible=tuple(tuple(row) for row in mask),
        carried=state.carried,
        mission=state.mission,
    )


Pose = tuple[int, int, int]


def _plan(
    state: GridState,
    is_goal: Callable[[Pose], bool],
    passable: Callable[[int, int], bool],
) -> Optional[list[str]]:
    """Breadth-first search over (x, y, heading) poses; returns action names or None."""
    start: Pose = (state.agent_pos[0], state.agent_pos[1], int(state.agent_dir))
    if is_goal(start):
        return []
    parents: dict[Pose, tuple[Pose, str]] = {}
    seen = {start}
    queue = deque([start])
    while queue:
        pose = queue.popleft()
        x, y, d = pose
        dx, dy = DIR_TO_VEC[Direction(d)]
        successors = [
            ((x, y, (d - 1) % 4), ACTION_LEFT),
            ((x, y, (d + 1) % 4), ACTION_RIGHT),
        ]
        if passable(x + dx, y + dy):
            successors.append(((x + dx, y + dy, d), ACTION_FORWARD))
        for nxt, name in successors:
            if nxt in seen:
                continue
            seen.add(nxt)
            parents[nxt] = (pose, name)
            if is_goal(nxt):
                plan = []
                while nxt != start:
                    nxt, name = parents[nxt]
                    plan.append(name)
                return list(reversed(plan))
            queue.append(nxt)
    return None


def _front_of(pose: Pose) -> tuple[int, int]:
    dx, dy = DIR_TO_VEC[Direction(pose[2])]
    return pose[0] + dx, pose[1] + dy


def _walkable(state: GridState, blocked: frozenset = frozenset()) -> Callable[[int, int], bool]:
    """Cells the agent can enter, treating closed unlocked doors as passable (toggled on the way)."""

    def passable(x: int, y: int) -> bool:
        if (x, y) in blocked or not state.in_bounds(x, y):
            return False
        cell = state.get(x, y)
        if cell is None or cell.can_overlap:
            return True
        return cell.kind == OBJ_DOOR and cell.state == DOOR_CLOSED

    return passable


def _plan_to_face(state: GridState, target: tuple[int, int], blocked: frozenset = frozenset()) -> Optional[list[str]]:
    return _plan(state, lambda pose: _front_of(pose) == target, _walkable(state, blocked))


def _first_action(state: GridState, plan: list[str], interaction: str) -> str:
    if not plan:
        return interaction
    name = plan[0]
    front = state.get(*state.front_pos)
    if name == ACTION_FORWARD and front is not None and front.kind == OBJ_DOOR and front.state == DOOR_CLOSED:
        return ACTION_TOGGLE
    return name


def _drop_action(state: GridState, keep_reachable: Optional[tuple[int, int]]) -> str:
    """Drop the carried object on a cell that keeps `keep_reachable` reachable."""
    scratch = state.copy()

    def good_drop(pose: Pose) -> bool:
        cell = _front_of(pose)
        if not state.in_bounds(*cell) or state.get(*cell) is not None or cell == (pose[0], pose[1]):
            return False
        if keep_reachable is None:
            return True
        scratch.agent_pos, scratch.agent_dir = (pose[0], pose[1]), Direction(pose[2])
        return _plan_to_face(scratch, keep_reachable, blocked=frozenset([cell])) is not None

    plan = _plan(state, good_drop, _walkable(state))
    if plan is None:
        raise UnsolvableLayoutError(f"No place to drop the {state.carried.kind} in {state.env_kind}")
    return _first_action(state, plan, ACTION_DROP)


def _dynamic_obstacles_action(state: GridState) -> str:
    goal = state.find(OBJ_GOAL)
    obstacles = frozenset(state.obstacle_positions)
    hazards = frozenset(
        (x + dx, y + dy) for x, y in obstacles for dx, dy in DIR_TO_VEC.values() if (x + dx, y + dy) != goal
    )

    def reached(pose: Pose) -> bool:
        return (pose[0], pose[1]) == goal

    for blocked in (obstacles | hazards, obstacles):
        plan = _plan(state, reached, _walkable(state, blocked))
        if plan:
            return plan[0]
    # boxed in: wait by turning
    return ACTION_LEFT


def _locked_doors(state: GridState) -> list[tuple[int, int]]:
    return [
        (x, y)
        for y in range(state.height)
        for x in range(state.width)
        if state.cells[y][x] is not None
        and state.cells[y][x].kind == OBJ_DOOR
        and state.cells[y][x].state == DOOR_LOCKED
    ]


def _pickup_task_action(state: GridState) -> str:
    target_pos = state.find(*state.task.target)
    if target_pos is None:
        raise UnsolvableLayoutError("Target object is not on the grid")
    reach_target = _plan_to_face(state, target_pos)

    if state.carried is None:
        if reach_target is not None:
            return _first_action(state, reach_target, ACTION_PICKUP)
        locked = _locked_doors(state)
        if not locked:
            raise UnsolvableLayoutError("Target unreachable and no locked door to open")
        door = state.get(*locked[0])
        key_pos = state.find(OBJ_KEY, door.color)
        if key_pos is None:
            raise UnsolvableLayoutError(f"No {door.color} key for the locked door")
        reach_key = _plan_to_face(state, key_pos)
        if reach_key is None:
            raise UnsolvableLayoutError("Key is unreachable")
        return _first_action(state, reach_key, ACTION_PICKUP)

    if reach_target is not None:
        return _drop_action(state, keep_reachable=target_pos)
    if state.carried.kind == OBJ_KEY:
        for door_pos in _locked_doors(state):
            if state.get(*door_pos).color == state.carried.color:
                reach_door = _plan_to_face(state, door_pos)
                if reach_door is not None:
                    return _first_action(state, reach_door, ACTION_TOGGLE)
    return _drop_action(state, keep_reachable=None)


def _put_next_action(state: GridState) -> str:
    task = state.task
    anchor = state.find(*task.anchor)
    if anchor is None:
        raise UnsolvableLayoutError("Anchor object is not on the grid")

    if state.carried is None:
        target_pos = state.find(*task.target)
        if target_pos is None:
            raise UnsolvableLayoutError("Target object is not on the grid")
        plan = _plan_to_face(state, target_pos)
        if plan is None:
            raise UnsolvableLayoutError("Target object is unreachable")
        return _first_action(state, plan, ACTION_PICKUP)

    if not state.carried.matches(*task.target):
        return _drop_action(state, keep_reachable=None)

    def next_to_anchor(pose: Pose) -> bool:
        cell = _front_of(pose)
        return (
            state.in_bounds(*cell)
            and state.get(*cell) is None
            and abs(cell[0] - anchor[0]) + abs(cell[1] - anchor[1]) == 1
        )

    plan = _plan(state, next_to_anchor, _walkable(state))
    if plan is None:
        raise UnsolvableLayoutError("No free cell next to the anchor object")
    return _first_action(state, plan, ACTION_DROP)


def oracle_action(state: GridState) -> Action:
    """
    Expert action from the full hidden state.

    Dynamic obstacles re-plans every step around obstacles and the cells next to them, waiting when boxed
    in; the other tasks follow the subgoal order key -> door -> target.
    """
    if state.finished:
        raise EpisodeFinishedError("Episode already finished")
    if state.env_kind == ENV_DYNAMIC_OBSTACLES:
        name = _dynamic_obstacles_action(state)
    elif state.task.kind == "pickup":
        name = _pickup_task_action(state)
    elif state.task.kind == "put_next":
        name = _put_next_action(state)
    else:
        raise UnsolvableLayoutError(f"No oracle for task {state.task.kind!r}")
    return action_by_name(state.env_kind, name)
