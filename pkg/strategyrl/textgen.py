"""Rule-based observation-to-text conversion."""

import logging
import re
from dataclasses import dataclass
from typing import Any, Optional

from .error import TrajectoryError
from .gridworld import OBJ_DOOR, OBJ_WALL, Observation, WorldObj

_LOGGER = logging.getLogger(__name__)

CONVERTER_VERSION = "textgen-1"

NOTHING_VISIBLE = "You see nothing"

_LEADING_ARTICLE = re.compile(r"^(The|A|An)\b")


@dataclass(frozen=True)
class TextObservation:
    sentences: tuple[str, ...]
    goal: str

    def to_dict(self) -> dict[str, Any]:
        return {"sentences": list(self.sentences), "goal": self.goal}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TextObservation":
        return cls(sentences=tuple(data["sentences"]), goal=data["goal"])


def _steps(n: int) -> str:
    return f"{n} step" if n == 1 else f"{n} steps"


def describe_offset(forward: int, lateral: int) -> str:
    """Phrase a view offset; lateral < 0 is to the left."""
    side = "left" if lateral < 0 else "right"
    if lateral == 0:
        return f"{_steps(forward)} forward"
    if forward == 0:
        return f"{_steps(abs(lateral))} {side}"
    return f"{_steps(abs(lateral))} {side} and {_steps(forward)} forward"


def describe_object(obj: WorldObj) -> str:
    if obj.kind == OBJ_DOOR:
        return f"{obj.state} {obj.color} door"
    return f"{obj.color} {obj.kind}"


def with_article(phrase: str) -> str:
    return f"an {phrase}" if phrase[:1] in "aeiou" else f"a {phrase}"


def _nearest_walls(obs: Observation) -> set[tuple[int, int]]:
    """Nearest visible wall straight ahead, straight left and straight right."""
    size = len(obs.view)
    half = size // 2
    agent_row = size - 1

    def is_wall(vx: int, vy: int) -> bool:
        cell = obs.view[vy][vx]
        return obs.visible[vy][vx] and cell is not None and cell.kind == OBJ_WALL

    rays = [
        [(half, vy) for vy in range(agent_row - 1, -1, -1)],
        [(vx, agent_row) for vx in range(half - 1, -1, -1)],
        [(vx, agent_row) for vx in range(half + 1, size)],
    ]
    chosen = set()
    for ray in rays:
        for vx, vy in ray:
            if is_wall(vx, vy):
                chosen.add((vx, vy))
                break
    return chosen


def observation_to_text(obs: Observation) -> TextObservation:
    """
    Convert an observation to a sentence list.

    The carried object comes first, then visible cells scanned near to far, left to right.
    """
    size = len(obs.view)
    half = size // 2
    agent_row = size - 1
    walls = _nearest_walls(obs)

    sentences = []
    if obs.carried is not None:
        sentences.append(f"You carry {with_article(describe_object(obs.carried))}")

    for vy in range(agent_row, -1, -1):
        for vx in range(size):
            if (vx, vy) == (half, agent_row) or not obs.visible[vy][vx]:
                continue
            cell: Optional[WorldObj] = obs.view[vy][vx]
            if cell is None:
                continue
            offset = describe_offset(agent_row - vy, vx - half)
            if cell.kind == OBJ_WALL:
                if (vx, vy) in walls:
                    sentences.append(f"You see a wall {offset}")
                continue
            sentences.append(f"You see {with_article(describe_object(cell))} {offset}")

    return TextObservation(sentences=tuple(sentences), goal=goal_to_text(obs.mission))


def goal_to_text(mission: str) -> str:
    """Normalize a mission string: collapse whitespace, drop a trailing period, lowercase a leading article."""
    text = " ".join(mission.split()) if mission else ""
    text = text.rstrip(".").strip()
    if not text:
        raise TrajectoryError("Mission text is empty")
    return _LEADING_ARTICLE.sub(lambda m: m.group(1).lower(), text)


def render_observation(text_obs: TextObservation) -> str:
    """Single-line rendering used in prompts and model inputs."""
    if not text_obs.sentences:
        return NOTHING_VISIBLE
    return ", ".join(text_obs.sentences)
