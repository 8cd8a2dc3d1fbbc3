"""Pseudo-states, expert demonstrations and the experience buffer."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

from .error import DemoFormatError, DemoRecordingError, TrajectoryError, UnsolvableLayoutError
from .gridworld import Action, EnvConfig, action_by_name, oracle_action, reset, step
from .textgen import CONVERTER_VERSION, TextObservation, observation_to_text, render_observation
from .util import validate_window

_LOGGER = logging.getLogger(__name__)

# Seeds tried per requested demonstration before giving up
DEMO_ATTEMPTS_PER_DEMO = 20

Step = tuple[TextObservation, Action]


@dataclass(frozen=True)
class PseudoState:
    """Length-H window of (observation, action) pairs plus the current observation."""

    history: tuple[Step, ...]
    current: TextObservation
    goal: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "history": [[obs.to_dict(), action_to_dict(action)] for obs, action in self.history],
            "current": self.current.to_dict(),
            "goal": self.goal,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PseudoState":
        return cls(
            history=tuple(
                (TextObservation.from_dict(obs), action_from_dict(action)) for obs, action in data["history"]
            ),
            current=TextObservation.from_dict(data["current"]),
            goal=data["goal"],
        )


def render_step_lines(steps: Sequence[Step], current: Optional[TextObservation] = None) -> list[str]:
    """Numbered "Observation k:" / "Action k:" lines, numbering from 1; `current` closes the window."""
    lines = []
    for number, (obs, action) in enumerate(steps, start=1):
        lines.append(f"Observation {number}: {render_observation(obs)}")
        lines.append(f"Action {number}: {action.name}")
    if current is not None:
        lines.append(f"Observation {len(steps) + 1}: {render_observation(current)}")
    return lines


def render_pseudo_state(state: PseudoState) -> list[str]:
    return render_step_lines(state.history, state.current)


def action_to_dict(action: Action) -> dict[str, Any]:
    return {"name": action.name, "index": action.index}


def action_from_dict(data: dict[str, Any]) -> Action:
    return Action(name=data["name"], index=int(data["index"]))


def make_pseudo_state(
    episode_history: Sequence[tuple[TextObservation, Optional[Action]]], t: int, history: int, goal: str
) -> PseudoState:
    """
    Build s_t from an episode.

    `episode_history[i]` holds o_(i+1) and the action taken after it; the action at t itself is not needed.
    """
    window = validate_window(history)
    if not 1 <= t <= len(episode_history):
        raise TrajectoryError(f"t={t} outside episode of length {len(episode_history)}")
    past = episode_history[max(0, t - 1 - window) : t - 1]
    for _, action in past:
        if action is None:
            raise TrajectoryError("History step without an action")
    return PseudoState(history=tuple(past), current=episode_history[t - 1][0], goal=goal)


class EpisodeTracker:
    """Accumulates a live episode and yields its current pseudo-state."""

    def __init__(self, history: int, goal: str):
        self.history = validate_window(history)
        self.goal = goal
        self.steps: list[tuple[TextObservation, Optional[Action]]] = []

    def observe(self, text_obs: TextObservation) -> None:
        self.steps.append((text_obs, None))

    def act(self, action: Action) -> None:
        if not self.steps or self.steps[-1][1] is not None:
            raise TrajectoryError("act() must follow observe()")
        self.steps[-1] = (self.steps[-1][0], action)

    def pseudo_state(self) -> PseudoState:
        return make_pseudo_state(self.steps, len(self.steps), self.history, self.goal)


@dataclass(frozen=True)
class Demonstration:
    env_kind: str
    seed: int
    goal: str
    steps: tuple[Step, ...]
    episode_return: float
    max_steps: Optional[int] = None
    converter_version: str = CONVERTER_VERSION

    @property
    def env_config(self) -> EnvConfig:
        return EnvConfig(env_kind=self.env_kind, seed=self.seed, max_steps=self.max_steps)


def run_oracle_episode(config: EnvConfig) -> Optional[Demonstration]:
    """Roll out the oracle on one layout; None if the episode does not end in success."""
    state, obs = reset(config)
    steps: list[Step] = []
    reward, terminated = 0.0, False
    goal = observation_to_text(obs).goal
    while not state.finished:
        text_obs = observation_to_text(obs)
        action = oracle_action(state)
        steps.append((text_obs, action))
        state, obs, reward, terminated, _ = step(state, action)
    if not terminated or reward <= 0:
        return None
    return Demonstration(
        env_kind=config.env_kind,
        seed=config.seed,
        goal=goal,
        steps=tuple(steps),
        episode_return=reward,
        max_steps=config.max_steps,
    )


def record_demonstrations(config: EnvConfig, n: int) -> list[Demonstration]:
    """Record n successful oracle demonstrations, trying seeds config.seed, config.seed + 1, ..."""
    if n < 0:
        raise DemoRecordingError(f"Can't record {n} demonstrations")
    demos: list[Demonstration] = []
    seed = config.seed
    attempts = n * DEMO_ATTEMPTS_PER_DEMO
    while len(demos) < n:
        if attempts <= 0:
            raise DemoRecordingError(f"Found only {len(demos)} of {n} solvable {config.env_kind} layouts")
        attempts -= 1
        try:
            demo = run_oracle_episode(config.with_seed(seed))
        except UnsolvableLayoutError as err:
            _LOGGER.warning("Seed %s of %s is unsolvable (%s), resampling", seed, config.env_kind, err)
            demo = None
        else:
            if demo is None:
                _LOGGER.warning("Oracle failed on seed %s of %s, resampling", seed, config.env_kind)
        if demo is not None:
            demos.append(demo)
        seed += 1
    _LOGGER.info("Recorded %d %s demonstrations", len(demos), config.env_kind)
    return demos


def replay_demonstration(demo: Demonstration) -> list[TextObservation]:
    """Re-run the demonstration's actions from its seed and return the observed text."""
    state, obs = reset(demo.env_config)
    observed = []
    for _, action in demo.steps:
        observed.append(observation_to_text(obs))
        state, obs, *_ = step(state, action)
    return observed


def serialize_demonstrations(demos: Iterable[Demonstration]) -> str:
    """Line-delimited records: a header per demonstration followed by one line per step."""
    lines = []
    for demo in demos:
        header = {
            "env_kind": demo.env_kind,
            "seed": demo.seed,
            "max_steps": demo.max_steps,
            "goal": demo.goal,
            "n_steps": len(demo.steps),
            "return": demo.episode_return,
            "converter_version": demo.converter_version,
        }
        lines.append(json.dumps(header, sort_keys=True))
        for t, (obs, action) in enumerate(demo.steps, start=1):
            record = {"t": t, "sentences": list(obs.sentences), "action": action.name, "goal": obs.goal}
            lines.append(json.dumps(record, sort_keys=True))
    return "".join(line + "\n" for line in lines)


def deserialize_demonstrations(text: str) -> list[Demonstration]:
    demos: list[Demonstration] = []
    header: Optional[dict[str, Any]] = None
    steps: list[Step] = []

    def finish(line_number: int) -> None:
        if header is None:
            return
        if len(steps) != header["n_steps"]:
            raise DemoFormatError(line_number, f"expected {header['n_steps']} steps, found {len(steps)}")
        demos.append(
            Demonstration(
                env_kind=header["env_kind"],
                seed=header["seed"],
                goal=header["goal"],
                steps=tuple(steps),
                episode_return=header["return"],
                max_steps=header.get("max_steps"),
                converter_version=header.get("converter_version", CONVERTER_VERSION),
            )
        )

    lines = text.splitlines()
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as err:
            raise DemoFormatError(line_number, f"not a JSON record ({err.msg})") from err
        if not isinstance(record, dict):
            raise DemoFormatError(line_number, "record is not an object")
        try:
            if "env_kind" in record:
                finish(line_number)
                header, steps = record, []
                for key in ("seed", "goal", "n_steps", "return"):
                    if key not in header:
                        raise DemoFormatError(line_number, f"header lacks {key!r}")
                continue
            if header is None:
                raise DemoFormatError(line_number, "step record before any header")
            if record["t"] != len(steps) + 1:
                raise DemoFormatError(line_number, f"expected t={len(steps) + 1}, got {record['t']}")
            if len(steps) >= header["n_steps"]:
                raise DemoFormatError(line_number, "more steps than the header declares")
            obs = TextObservation(sentences=tuple(record["sentences"]), goal=record["goal"])
            steps.append((obs, action_by_name(header["env_kind"], record["action"])))
        except (KeyError, TypeError, ValueError) as err:
            raise DemoFormatError(line_number, f"malformed record: {err}") from err
    finish(len(lines) + 1)
    return demos


def write_demonstrations(path: Union[str, Path], demos: Iterable[Demonstration]) -> None:
    with open(path, "w") as demofile:
        demofile.write(serialize_demonstrations(demos))


def read_demonstrations(path: Union[str, Path]) -> list[Demonstration]:
    with open(path) as demofile:
        return deserialize_demonstrations(demofile.read())


@dataclass
class BufferEntry:
    pseudo_state: PseudoState
    action: Action
    reward: float
    value: float
    log_prob: float
    done: bool


@dataclass
class Segment:
    """A run of consecutive entries from one worker; `bootstrap_value` is V of the state after the last entry."""

    start: int
    end: int
    bootstrap_value: float = 0.0


@dataclass
class ExperienceBuffer:
    entries: list[BufferEntry] = field(default_factory=list)
    segments: list[Segment] = field(default_factory=list)
    advantages: Optional[list[float]] = None
    returns_to_go: Optional[list[float]] = None

    def __len__(self) -> int:
        return len(self.entries)

    def segment_list(self) -> list[Segment]:
        """Worker segments, or one segment spanning the whole buffer."""
        if self.segments:
            return self.segments
        return [Segment(0, len(self.entries), 0.0)]

    @property
    def rewards(self) -> list[float]:
        return [entry.reward for entry in self.entries]

    @property
    def values(self) -> list[float]:
        return [entry.value for entry in self.entries]

    @property
    def dones(self) -> list[bool]:
        return [entry.done for entry in self.entries]


def dump_buffer(buffer: ExperienceBuffer) -> str:
    header = {
        "length": len(buffer),
        "segments": [[s.start, s.end, s.bootstrap_value] for s in buffer.segments],
        "advantages": buffer.advantages,
        "returns_to_go": buffer.returns_to_go,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for entry in buffer.entries:
        record = {
            "pseudo_state": entry.pseudo_state.to_dict(),
            "action": action_to_dict(entry.action),
            "reward": entry.reward,
            "value": entry.value,
            "log_prob": entry.log_prob,
            "done": entry.done,
        }
        lines.append(json.dumps(record, sort_keys=True))
    return "".join(line + "\n" for line in lines)


def load_buffer(text: str) -> ExperienceBuffer:
    lines = text.splitlines()
    if not lines:
        raise DemoFormatError(1, "empty buffer file")
    try:
        header = json.loads(lines[0])
        buffer = ExperienceBuffer(
            segments=[Segment(int(start), int(end), float(boot)) for start, end, boot in header["segments"]],
            advantages=header["advantages"],
            returns_to_go=header["returns_to_go"],
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        raise DemoFormatError(1, f"malformed buffer header: {err}") from err

    for line_number, line in enumerate(lines[1:], start=2):
        try:
            record = json.loads(line)
            buffer.entries.append(
                BufferEntry(
                    pseudo_state=PseudoState.from_dict(record["pseudo_state"]),
                    action=action_from_dict(record["action"]),
                    reward=float(record["reward"]),
                    value=float(record["value"]),
                    log_prob=float(record["log_prob"]),
                    done=bool(record["done"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            raise DemoFormatError(line_number, f"malformed buffer entry: {err}") from err
    if len(buffer) != header["length"]:
        raise DemoFormatError(len(lines) + 1, f"expected {header['length']} entries, found {len(buffer)}")
    return buffer
