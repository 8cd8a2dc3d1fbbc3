"""Evaluation metrics, sample-efficiency curves and the run directory."""

import difflib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np

from .config import RunConfig
from .const import (
    CHECKPOINT_FINAL,
    DIR_CHECKPOINTS,
    FILE_BC_LOSS_CSV,
    FILE_CONFIG_SNAPSHOT,
    FILE_CURVE_CSV,
    FILE_DEMOS,
    FILE_EVAL_REPORT,
    FILE_LLM_AUDIT,
    FILE_STRATEGY_LOG,
    FILE_TRAIN_CSV,
    TEST_SEED_BASE,
)
from .error import CurveError, StrategyRLError
from .gridworld import EnvConfig, reset, step
from .policy import AgentModel
from .textgen import observation_to_text
from .trajectory import EpisodeTracker
from .util import write_csv

_LOGGER = logging.getLogger(__name__)

TRAIN_CSV_HEADER = [
    "stage",
    "frames",
    "mean_return",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "validation_return",
]
CURVE_CSV_HEADER = ["frames", "running_max_validation_return"]


@dataclass
class EvalReport:
    mean_return: float
    success_rate: float
    n_episodes: int
    returns: list[float] = field(default_factory=list)

    @classmethod
    def from_episodes(cls, returns: Sequence[float], successes: Sequence[bool]) -> "EvalReport":
        if not returns:
            raise StrategyRLError("Can't report on zero episodes")
        return cls(
            mean_return=float(np.mean(returns)),
            success_rate=float(np.mean(successes)),
            n_episodes=len(returns),
            returns=[float(value) for value in returns],
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def evaluate(agent: AgentModel, env_config: EnvConfig, n_episodes: int, seed_base: int = TEST_SEED_BASE) -> EvalReport:
    """
    Greedy evaluation on the fixed seed list seed_base, seed_base + 1, ...

    All episodes step together and the agent scores the live ones in one batch per step.
    """
    if n_episodes < 1:
        raise StrategyRLError(f"n_episodes must be at least 1, got {n_episodes}")

    states, trackers = [], []
    for i in range(n_episodes):
        state, obs = reset(env_config.with_seed(seed_base + i))
        text_obs = observation_to_text(obs)
        tracker = EpisodeTracker(agent.history, text_obs.goal)
        tracker.observe(text_obs)
        states.append(state)
        trackers.append(tracker)

    returns = [0.0] * n_episodes
    live = list(range(n_episodes))
    while live:
        actions, _, _ = agent.act([trackers[i].pseudo_state() for i in live], greedy=True)
        still_live = []
        for i, action in zip(live, actions):
            trackers[i].act(action)
            _, obs, reward, terminated, truncated = step(states[i], action)
            returns[i] += reward
            if not (terminated or truncated):
                trackers[i].observe(observation_to_text(obs))
                still_live.append(i)
        live = still_live

    successes = [state.result is not None and state.result.success for state in states]
    report = EvalReport.from_episodes(returns, successes)
    _LOGGER.debug("Evaluated %d episodes: MR %.4f, SR %.2f", n_episodes, report.mean_return, report.success_rate)
    return report


def sample_efficiency_curve(points: Sequence[tuple[int, float]]) -> list[tuple[int, float]]:
    """(frames, best validation mean return so far)."""
    if not points:
        raise CurveError("No validation evaluations logged")
    curve = []
    best = -np.inf
    for frames, mean_return in points:
        best = max(best, mean_return)
        curve.append((int(frames), float(best)))
    return curve


def emit_sample_efficiency_curve(
    points: Sequence[tuple[int, float]], path: Union[str, Path]
) -> list[tuple[int, float]]:
    curve = sample_efficiency_curve(points)
    write_csv(path, CURVE_CSV_HEADER, curve)
    return curve


def curve_points_from_train_log(rows: Iterable[dict[str, str]]) -> list[tuple[int, float]]:
    """Validation points of a train.csv read back with read_csv."""
    return [(int(row["frames"]), float(row["validation_return"])) for row in rows if row["validation_return"]]


class RunDirectory:
    """Fixed file layout of one run."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.train_rows: list[list[Any]] = []

    def ensure(self) -> "RunDirectory":
        self.checkpoints.mkdir(parents=True, exist_ok=True)
        return self

    @property
    def checkpoints(self) -> Path:
        return self.path / DIR_CHECKPOINTS

    @property
    def config_snapshot(self) -> Path:
        return self.path / FILE_CONFIG_SNAPSHOT

    @property
    def demos(self) -> Path:
        return self.path / FILE_DEMOS

    @property
    def strategy_log(self) -> Path:
        return self.path / FILE_STRATEGY_LOG

    @property
    def train_csv(self) -> Path:
        return self.path / FILE_TRAIN_CSV

    @property
    def curve_csv(self) -> Path:
        return self.path / FILE_CURVE_CSV

    @property
    def eval_report(self) -> Path:
        return self.path / FILE_EVAL_REPORT

    @property
    def bc_loss_csv(self) -> Path:
        return self.path / FILE_BC_LOSS_CSV

    @property
    def llm_audit(self) -> Path:
        return self.path / FILE_LLM_AUDIT

    def checkpoint(self, name: str = CHECKPOINT_FINAL) -> Path:
        return self.checkpoints / name

    def write_config_snapshot(self, config: RunConfig) -> None:
        self.config_snapshot.write_text(config.snapshot())

    def reset_strategy_log(self) -> None:
        self.strategy_log.write_text("")

    def append_strategy_record(self, record: dict[str, Any]) -> None:
        with open(self.strategy_log, "a") as logfile:
            logfile.write(json.dumps(record, sort_keys=True) + "\n")

    def read_strategy_log(self) -> list[dict[str, Any]]:
        with open(self.strategy_log) as logfile:
            return [json.loads(line) for line in logfile if line.strip()]

    def add_train_row(
        self,
        stage: str,
        frames: int,
        mean_return: Optional[float] = None,
        policy_loss: Optional[float] = None,
        value_loss: Optional[float] = None,
        entropy: Optional[float] = None,
        clip_fraction: Optional[float] = None,
        validation_return: Optional[float] = None,
    ) -> None:
        row = [stage, frames, mean_return, policy_loss, value_loss, entropy, clip_fraction, validation_return]
        self.train_rows.append(["" if value is None else value for value in row])
        write_csv(self.train_csv, TRAIN_CSV_HEADER, self.train_rows)

    def write_curve(self) -> list[tuple[int, float]]:
        points = [(row[1], row[7]) for row in self.train_rows if row[7] != ""]
        return emit_sample_efficiency_curve(points, self.curve_csv)

    def write_eval_report(self, report: EvalReport) -> None:
        self.eval_report.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def _diff(before: str, after: str, before_label: str, after_label: str) -> list[str]:
    return list(
        difflib.unified_diff(
            before.splitlines(), after.splitlines(), fromfile=before_label, tofile=after_label, lineterm=""
        )
    )


def _format_return(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def format_strategy_log(records: Sequence[dict[str, Any]]) -> str:
    """
    Human-readable strategy evolution.

    One block per record, a unified diff whenever an epoch changed the memory, and finally the initial list
    against the list of the best-validating record.
    """
    if not records:
        return "No strategy records\n"

    lines = []
    previous = records[0]
    for record in records:
        if record["epoch"] == 0:
            lines.append(f"Epoch 0 (initial), version {record['version']}")
        else:
            verdict = "accepted" if record["accepted"] else "rejected"
            if not record["forked"]:
                verdict = "no candidate"
            lines.append(
                f"Epoch {record['epoch']}: {verdict}, R1={_format_return(record['r1'])} "
                f"R2={_format_return(record['r2'])}, frames {record['frames']}, version {record['version']}"
            )
            if record.get("llm_error"):
                lines.append(f"  LLM error: {record['llm_error']}")
            if record["memory"] != previous["memory"]:
                lines.extend(
                    "  " + line
                    for line in _diff(
                        previous["memory"],
                        record["memory"],
                        f"version {previous['version']}",
                        f"version {record['version']}",
                    )
                )
        if record["epoch"] == 0 or record["memory"] != previous["memory"]:
            lines.extend("  " + line for line in record["memory"].splitlines())
        previous = record

    scored = [record for record in records if record.get("validation_return") is not None]
    if scored:
        initial = records[0]
        best = max(scored, key=lambda record: record["validation_return"])
        lines.append("")
        lines.append(
            f"Initial vs best (epoch {best['epoch']}, validation return {best['validation_return']:.4f}):"
        )
        diff = _diff(initial["memory"], best["memory"], "initial", "best")
        if diff:
            lines.extend("  " + line for line in diff)
        else:
            lines.append("  (identical)")
    return "\n".join(lines) + "\n"
