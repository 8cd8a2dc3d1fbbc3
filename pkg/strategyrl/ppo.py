"""Experience collection, advantage estimation and the clipped-surrogate PPO update."""

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import torch

from .config import PpoConfig
from .const import TRAINING_SEED_HIGH, TRAINING_SEED_LOW
from .gridworld import EnvConfig, GridState, reset, step
from .policy import AgentModel
from .textgen import observation_to_text
from .trajectory import BufferEntry, EpisodeTracker, ExperienceBuffer, Segment
from .util import make_rng, make_torch_generator

_LOGGER = logging.getLogger(__name__)

Number = Union[float, torch.Tensor]


@dataclass
class _Worker:
    state: GridState
    tracker: EpisodeTracker
    episode_return: float = 0.0


@dataclass
class Rollout:
    """A collected buffer and the returns of the episodes that finished while collecting it."""

    buffer: ExperienceBuffer
    episode_returns: list[float] = field(default_factory=list)

    @property
    def mean_return(self) -> Optional[float]:
        if not self.episode_returns:
            return None
        return float(np.mean(self.episode_returns))


class RolloutCollector:
    """
    Owns the worker environments; episodes carry over between consecutive collections.

    Workers step in lockstep so the agent scores all of them in one batched forward pass.
    """

    def __init__(
        self,
        env_config: EnvConfig,
        num_workers: int,
        history: int,
        rng: np.random.Generator,
        generator: Optional[torch.Generator] = None,
    ):
        self.env_config = env_config
        self.history = history
        self.rng = rng
        self.generator = generator
        self.workers = [self._new_episode() for _ in range(num_workers)]

    def _new_episode(self) -> _Worker:
        seed = int(self.rng.integers(TRAINING_SEED_LOW, TRAINING_SEED_HIGH))
        state, obs = reset(self.env_config.with_seed(seed))
        text_obs = observation_to_text(obs)
        tracker = EpisodeTracker(self.history, text_obs.goal)
        tracker.observe(text_obs)
        return _Worker(state=state, tracker=tracker)

    def collect(self, agent: AgentModel, frames_per_worker: int) -> Rollout:
        """Run frames_per_worker steps in every worker; the buffer is laid out worker by worker."""
        per_worker: list[list[BufferEntry]] = [[] for _ in self.workers]
        finished_returns: list[float] = []

        for _ in range(frames_per_worker):
            states = [worker.tracker.pseudo_state() for worker in self.workers]
            actions, log_probs, values = agent.act(states, generator=self.generator)
            for index, worker in enumerate(self.workers):
                action = actions[index]
                worker.tracker.act(action)
                _, obs, reward, terminated, truncated = step(worker.state, action)
                worker.episode_return += reward
                done = terminated or truncated
                per_worker[index].append(
                    BufferEntry(
                        pseudo_state=states[index],
                        action=action,
                        reward=reward,
                        value=values[index],
                        log_prob=log_probs[index],
                        done=done,
                    )
                )
                if done:
                    finished_returns.append(worker.episode_return)
                    self.workers[index] = self._new_episode()
                else:
                    worker.tracker.observe(observation_to_text(obs))

        # V of the state after each worker's last step, for tails cut by the window
        _, _, tail_values = agent.act([worker.tracker.pseudo_state() for worker in self.workers], greedy=True)

        buffer = ExperienceBuffer()
        for index, entries in enumerate(per_worker):
            start = len(buffer.entries)
            buffer.entries.extend(entries)
            bootstrap = 0.0 if entries[-1].done else tail_values[index]
            buffer.segments.append(Segment(start=start, end=len(buffer.entries), bootstrap_value=bootstrap))
        _LOGGER.debug("Collected %d frames, %d finished episodes", len(buffer), len(finished_returns))
        return Rollout(buffer=buffer, episode_returns=finished_returns)


def collect_experience(
    agent: AgentModel, env_config: EnvConfig, config: PpoConfig, history: int, seed: int
) -> ExperienceBuffer:
    """One-off collection of T = num_workers x frames_per_worker frames from fresh episodes."""
    collector = RolloutCollector(
        env_config,
        config.num_workers,
        history,
        rng=make_rng(seed, "env"),
        generator=make_torch_generator(seed, "sampling"),
    )
    return collector.collect(agent, config.frames_per_worker).buffer


def compute_gae(buffer: ExperienceBuffer, gamma: float, gae_lambda: float) -> ExperienceBuffer:
    """
    Fill in advantages and returns-to-go.

    delta_t = r_t + gamma * V(s_t+1) * (1 - done_t) - V(s_t); A_t = delta_t + gamma * lambda * (1 - done_t) * A_t+1.
    Each segment's tail bootstraps from its recorded value.
    """
    advantages = [0.0] * len(buffer)
    for segment in buffer.segment_list():
        next_value = segment.bootstrap_value
        running = 0.0
        for t in reversed(range(segment.start, segment.end)):
            entry = buffer.entries[t]
            nonterminal = 0.0 if entry.done else 1.0
            delta = entry.reward + gamma * next_value * nonterminal - entry.value
            running = delta + gamma * gae_lambda * nonterminal * running
            advantages[t] = running
            next_value = entry.value
    buffer.advantages = advantages
    buffer.returns_to_go = [advantage + entry.value for advantage, entry in zip(advantages, buffer.entries)]
    return buffer


def ppo_surrogate(ratio: Number, advantage: Number, clip_eps: float) -> Number:
    """min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A), elementwise for tensors."""
    if isinstance(ratio, torch.Tensor) or isinstance(advantage, torch.Tensor):
        ratio = torch.as_tensor(ratio)
        clipped = ratio.clamp(1 - clip_eps, 1 + clip_eps)
        return torch.min(ratio * advantage, clipped * advantage)
    clipped = min(max(ratio, 1 - clip_eps), 1 + clip_eps)
    return min(ratio * advantage, clipped * advantage)


def normalize_advantages(advantages: torch.Tensor) -> torch.Tensor:
    if advantages.numel() < 2:
        return advantages
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float


def ppo_optimizer(agent: AgentModel, learning_rate: float) -> torch.optim.Optimizer:
    """The agent's persistent Adam; it travels with the agent when cloned."""
    if agent.optimizer is None or agent.optimizer.param_groups[0]["lr"] != learning_rate:
        agent.optimizer = torch.optim.Adam(agent.parameters(), lr=learning_rate)
    return agent.optimizer


def ppo_update(
    agent: AgentModel, buffer: ExperienceBuffer, config: PpoConfig, generator: Optional[torch.Generator] = None
) -> UpdateStats:
    """Minibatch PPO epochs over one buffer, updating core, language-modeling head and critic."""
    if buffer.advantages is None or buffer.returns_to_go is None:
        raise ValueError("compute_gae must run before ppo_update")

    dtype = agent.dtype
    optimizer = ppo_optimizer(agent, config.learning_rate)
    advantages = torch.tensor(buffer.advantages, dtype=dtype)
    returns = torch.tensor(buffer.returns_to_go, dtype=dtype)
    old_log_probs = torch.tensor([entry.log_prob for entry in buffer.entries], dtype=dtype)
    actions = torch.tensor([entry.action.index for entry in buffer.entries], dtype=torch.long)

    policy_losses, value_losses, entropies, clip_fractions = [], [], [], []
    agent.train()
    for _ in range(config.epochs):
        order = torch.randperm(len(buffer), generator=generator)
        for start in range(0, len(buffer), config.batch_size):
            index = order[start : start + config.batch_size]
            output = agent([buffer.entries[int(i)].pseudo_state for i in index])
            log_probs = output.distribution.log_probs.gather(-1, actions[index].unsqueeze(-1)).squeeze(-1)
            ratio = torch.exp(log_probs - old_log_probs[index])

            batch_advantages = advantages[index]
            if config.normalize_advantages:
                batch_advantages = normalize_advantages(batch_advantages)

            policy_loss = -ppo_surrogate(ratio, batch_advantages, config.clip_eps).mean()
            value_loss = ((output.values - returns[index]) ** 2).mean()
            entropy = output.distribution.entropy.mean()
            loss = policy_loss + config.value_coeff * value_loss - config.entropy_coeff * entropy

            optimizer.zero_grad()
            loss.backward()
            if config.max_grad_norm is not None:
                torch.nn.utils.clip_grad_norm_(agent.parameters(), config.max_grad_norm)
            optimizer.step()

            policy_losses.append(policy_loss.item())
            value_losses.append(value_loss.item())
            entropies.append(entropy.item())
            clip_fractions.append(float(((ratio - 1).abs() > config.clip_eps).to(dtype).mean()))

    stats = UpdateStats(
        policy_loss=float(np.mean(policy_losses)),
        value_loss=float(np.mean(value_losses)),
        entropy=float(np.mean(entropies)),
        clip_fraction=float(np.mean(clip_fractions)),
    )
    _LOGGER.debug("PPO update: %s", stats)
    return stats
