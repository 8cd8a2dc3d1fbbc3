"""Behavioral cloning of the strategy-conditioned agent on expert demonstrations."""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import torch

from .config import BcConfig
from .error import TrajectoryError
from .gridworld import Action
from .policy import AgentModel
from .trajectory import Demonstration, PseudoState, make_pseudo_state
from .util import write_csv

_LOGGER = logging.getLogger(__name__)

Sample = tuple[PseudoState, Action]


def bc_samples(demos: Sequence[Demonstration], history: int) -> list[Sample]:
    """(s_t, expert a_t) for every step of every demonstration, windowed like online rollouts."""
    samples = []
    for demo in demos:
        for t in range(1, len(demo.steps) + 1):
            state = make_pseudo_state(demo.steps, t, history, demo.goal)
            samples.append((state, demo.steps[t - 1][1]))
    return samples


def bc_loss_terms(agent: AgentModel, batch: Sequence[Sample]) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean cross-entropy against the expert actions and mean policy entropy."""
    if not batch:
        raise TrajectoryError("BC batch is empty")
    output = agent([state for state, _ in batch])
    targets = torch.tensor([action.index for _, action in batch], dtype=torch.long)
    log_probs = output.distribution.log_probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    return -log_probs.mean(), output.distribution.entropy.mean()


def bc_loss(agent: AgentModel, batch: Sequence[Sample], entropy_coeff: float) -> torch.Tensor:
    cross_entropy, entropy = bc_loss_terms(agent, batch)
    return cross_entropy - entropy_coeff * entropy


def bc_train(
    agent: AgentModel,
    demos: Sequence[Demonstration],
    config: BcConfig,
    generator: Optional[torch.Generator] = None,
    loss_csv: Union[str, Path, None] = None,
) -> tuple[AgentModel, list[float]]:
    """
    Imitate the expert for config.epochs epochs.

    Only the core reasoning module and its language-modeling head are optimized; the critic stays frozen.
    Returns the agent and the per-epoch mean loss.
    """
    if not demos:
        raise TrajectoryError("Behavioral cloning needs at least one demonstration")
    samples = bc_samples(demos, agent.history)
    optimizer = torch.optim.Adam(agent.policy_parameters(), lr=config.learning_rate)
    for param in agent.value_parameters():
        param.requires_grad_(False)

    curve = []
    agent.train()
    try:
        for epoch in range(config.epochs):
            order = torch.randperm(len(samples), generator=generator)
            total, count = 0.0, 0
            for start in range(0, len(samples), config.batch_size):
                batch = [samples[int(i)] for i in order[start : start + config.batch_size]]
                loss = bc_loss(agent, batch, config.entropy_coeff)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += loss.item() * len(batch)
                count += len(batch)
            curve.append(total / count)
            _LOGGER.info("BC epoch %d/%d: loss %.4f", epoch + 1, config.epochs, curve[-1])
    finally:
        for param in agent.value_parameters():
            param.requires_grad_(True)

    if loss_csv is not None:
        write_csv(loss_csv, ["epoch", "mean_loss"], [(epoch + 1, loss) for epoch, loss in enumerate(curve)])
    return agent, curve


def imitation_accuracy(agent: AgentModel, demos: Sequence[Demonstration]) -> float:
    """Fraction of demo steps where the greedy action equals the expert's."""
    samples = bc_samples(demos, agent.history)
    if not samples:
        return 0.0
    actions, _, _ = agent.act([state for state, _ in samples], greedy=True)
    matches = [chosen.index == expert.index for chosen, (_, expert) in zip(actions, samples)]
    return float(np.mean(matches))
