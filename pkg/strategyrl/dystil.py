"""Strategy-conditioned training loop: induction, behavioral cloning and propose-and-test PPO epochs."""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
import torch

from .bc import bc_train
from .config import RunConfig
from .const import (
    ACCEPTANCE_SEED_BASE,
    CHECKPOINT_BC,
    CHECKPOINT_BEST,
    CHECKPOINT_FINAL,
    MODE_DYSTIL,
    MODE_NO_STRATEGY,
    VALIDATION_SEED_BASE,
)
from .error import ConfigError, LlmError, SelectionError, StrategyParseError
from .gridworld import EnvConfig, action_set
from .harness import RunDirectory, evaluate, sample_efficiency_curve
from .llm_client import (
    PromptTemplates,
    StrategyClient,
    WorstPair,
    build_dynamic_prompt,
    build_initial_prompt,
    load_prompt_templates,
)
from .policy import AgentModel, save_checkpoint
from .ppo import RolloutCollector, UpdateStats, compute_gae, ppo_update
from .strategy import EMPTY_STRATEGIES, PROVENANCE_INITIAL, StrategyList, parse_strategy_list, provenance_for_epoch
from .trajectory import Demonstration, ExperienceBuffer
from .util import make_rng, make_torch_generator, substream_seed

_LOGGER = logging.getLogger(__name__)


def build_agent(
    env_kind: str,
    history: int,
    seed: int,
    memory: StrategyList = EMPTY_STRATEGIES,
    templates: Optional[PromptTemplates] = None,
) -> AgentModel:
    """Fresh agent for an environment, initialized from the run's "init" substream."""
    templates = templates or load_prompt_templates()
    return AgentModel(
        env_description=templates.agent_description(env_kind),
        actions=action_set(env_kind),
        memory=memory,
        history=history,
        seed=substream_seed(seed, "init"),
    )


def select_lowest_advantage(buffer: ExperienceBuffer, k: int) -> list[WorstPair]:
    """The k entries with the lowest advantage, ascending; ties keep buffer order."""
    if buffer.advantages is None:
        raise SelectionError("Advantages have not been computed")
    if not 1 <= k <= len(buffer):
        raise SelectionError(f"Can't select {k} pairs from a buffer of {len(buffer)}")
    order = sorted(range(len(buffer)), key=lambda index: buffer.advantages[index])
    return [
        (buffer.entries[index].pseudo_state, buffer.entries[index].action, buffer.advantages[index])
        for index in order[:k]
    ]


def evaluate_return(
    agent: AgentModel, env_config: EnvConfig, n_episodes: int, seed_base: int = ACCEPTANCE_SEED_BASE
) -> float:
    return evaluate(agent, env_config, n_episodes, seed_base=seed_base).mean_return


def induce_initial_strategies(
    env_kind: str,
    demos: Sequence[Demonstration],
    client: StrategyClient,
    templates: Optional[PromptTemplates] = None,
) -> StrategyList:
    """Query the strategy-generating LLM once with the demonstrations; returns S0."""
    response = client.query(build_initial_prompt(env_kind, demos, templates))
    strategies = parse_strategy_list(response).revised(version=1, provenance=PROVENANCE_INITIAL)
    _LOGGER.info("Induced %d initial strategies", len(strategies))
    return strategies


@dataclass
class EpochRecord:
    """One line of the strategy evolution log; epoch 0 is the initial induction."""

    epoch: int
    frames: int
    memory: str
    version: int
    accepted: bool = False
    forked: bool = False
    r1: Optional[float] = None
    r2: Optional[float] = None
    candidate: Optional[str] = None
    llm_error: Optional[str] = None
    mean_return: Optional[float] = None
    advantage_mean: Optional[float] = None
    advantage_std: Optional[float] = None
    advantage_min: Optional[float] = None
    advantage_max: Optional[float] = None
    validation_return: Optional[float] = None
    update: Optional[UpdateStats] = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data.pop("update")
        return data


@dataclass
class TrainingContext:
    """Everything an epoch needs besides the agent itself."""

    config: RunConfig
    demos: Sequence[Demonstration]
    client: Optional[StrategyClient]
    collector: RolloutCollector
    shuffle: torch.Generator
    templates: PromptTemplates

    @classmethod
    def create(
        cls,
        config: RunConfig,
        demos: Sequence[Demonstration],
        client: Optional[StrategyClient],
        templates: Optional[PromptTemplates] = None,
    ) -> "TrainingContext":
        collector = RolloutCollector(
            config.env,
            config.ppo.num_workers,
            config.history,
            rng=make_rng(config.seed, "env"),
            generator=make_torch_generator(config.seed, "sampling"),
        )
        return cls(
            config=config,
            demos=demos,
            client=client,
            collector=collector,
            shuffle=make_torch_generator(config.seed, "shuffle"),
            templates=templates or load_prompt_templates(),
        )


def _propose(agent: AgentModel, buffer: ExperienceBuffer, context: TrainingContext) -> StrategyList:
    worst_pairs = select_lowest_advantage(buffer, context.config.dystil.k)
    prompt = build_dynamic_prompt(
        context.config.env.env_kind, context.demos, agent.memory, worst_pairs, context.templates
    )
    return parse_strategy_list(context.client.query(prompt))


def dystil_epoch(
    agent: AgentModel, context: TrainingContext, epoch: int, frames: int
) -> tuple[AgentModel, EpochRecord]:
    """
    One epoch: collect, estimate advantages, and in dystil mode propose S' and keep the better candidate.

    A failed query or an unparseable reply degrades the epoch to a plain PPO update under S.
    """
    config = context.config
    rollout = context.collector.collect(agent, config.ppo.frames_per_worker)
    buffer = compute_gae(rollout.buffer, config.ppo.gamma, config.ppo.gae_lambda)
    advantages = np.asarray(buffer.advantages)
    record = EpochRecord(
        epoch=epoch,
        frames=frames + len(buffer),
        memory=agent.memory.text,
        version=agent.memory.version,
        mean_return=rollout.mean_return,
        advantage_mean=float(advantages.mean()),
        advantage_std=float(advantages.std()),
        advantage_min=float(advantages.min()),
        advantage_max=float(advantages.max()),
    )

    candidate = None
    if config.dystil.mode == MODE_DYSTIL and context.client is not None:
        try:
            candidate = _propose(agent, buffer, context)
        except (LlmError, StrategyParseError) as err:
            _LOGGER.warning("Epoch %d: keeping current strategies, no usable candidate (%s)", epoch, err)
            record.llm_error = str(err)

    if candidate is None:
        record.update = ppo_update(agent, buffer, config.ppo, context.shuffle)
        return agent, record

    candidate = candidate.revised(version=agent.memory.version + 1, provenance=provenance_for_epoch(epoch))
    record.forked = True
    record.candidate = candidate.text

    incumbent = agent.clone()
    challenger = agent.clone().with_memory(candidate)
    shuffle_state = context.shuffle.get_state()
    stats = ppo_update(incumbent, buffer, config.ppo, context.shuffle)
    after_state = context.shuffle.get_state()
    context.shuffle.set_state(shuffle_state)
    challenger_stats = ppo_update(challenger, buffer, config.ppo, context.shuffle)
    context.shuffle.set_state(after_state)

    record.r1 = evaluate_return(incumbent, config.env, config.dystil.eval_episodes)
    record.r2 = evaluate_return(challenger, config.env, config.dystil.eval_episodes)
    record.accepted = record.r2 > record.r1
    if record.accepted:
        agent, record.update = challenger, challenger_stats
    else:
        agent, record.update = incumbent, stats
    record.memory = agent.memory.text
    record.version = agent.memory.version
    _LOGGER.info(
        "Epoch %d: R1 %.4f, R2 %.4f, %s",
        epoch,
        record.r1,
        record.r2,
        "adopting new strategies" if record.accepted else "keeping strategies",
    )
    return agent, record


@dataclass
class TrainingResult:
    agent: AgentModel
    records: list[EpochRecord]
    bc_losses: list[float]
    curve: list[tuple[int, float]]
    best_validation_return: float


def run(
    config: RunConfig,
    demos: Sequence[Demonstration],
    client: Optional[StrategyClient] = None,
    run_dir: Optional[RunDirectory] = None,
    templates: Optional[PromptTemplates] = None,
) -> TrainingResult:
    """
    Train an agent end to end in the configured mode.

    dystil: induce S0, clone behavior, then propose-and-test epochs. static: induce S0 once, clone behavior,
    plain PPO. no_strategy: no LLM at all.
    """
    templates = templates or load_prompt_templates()
    mode = config.dystil.mode
    if mode == MODE_DYSTIL and config.dystil.k > config.ppo.buffer_size:
        raise ConfigError(f"k={config.dystil.k} exceeds the buffer size {config.ppo.buffer_size}")
    env_kind = config.env.env_kind
    agent = build_agent(env_kind, config.history, config.seed, templates=templates)
    if run_dir is not None:
        run_dir.ensure()
        run_dir.reset_strategy_log()

    initial_error = None
    if mode != MODE_NO_STRATEGY and client is not None:
        try:
            agent.with_memory(induce_initial_strategies(env_kind, demos, client, templates))
        except (LlmError, StrategyParseError) as err:
            _LOGGER.warning("Initial strategy induction failed, starting with an empty list: %s", err)
            initial_error = str(err)

    agent, bc_losses = bc_train(
        agent,
        demos,
        config.bc,
        generator=make_torch_generator(config.seed, "bc"),
        loss_csv=run_dir.bc_loss_csv if run_dir is not None else None,
    )
    frames = sum(len(demo.steps) for demo in demos)

    def validate(current: AgentModel) -> float:
        return evaluate(current, config.env, config.validation_episodes, seed_base=VALIDATION_SEED_BASE).mean_return

    best_return = validate(agent)
    points = [(frames, best_return)]
    initial = EpochRecord(
        epoch=0,
        frames=frames,
        memory=agent.memory.text,
        version=agent.memory.version,
        accepted=True,
        candidate=agent.memory.text,
        llm_error=initial_error,
        validation_return=best_return,
    )
    records = [initial]
    if run_dir is not None:
        run_dir.append_strategy_record(initial.to_dict())
        run_dir.add_train_row(
            "bc", frames, policy_loss=bc_losses[-1] if bc_losses else None, validation_return=best_return
        )
        save_checkpoint(agent, run_dir.checkpoint(CHECKPOINT_BC))
        save_checkpoint(agent, run_dir.checkpoint(CHECKPOINT_BEST), extra={"frames": frames})
    _LOGGER.info("Behavioral cloning done, validation return %.4f", best_return)

    context = TrainingContext.create(config, demos, client, templates)
    n_epochs = config.dystil.n_epochs
    if n_epochs is None:
        n_epochs = config.ppo.buffers_for_budget

    for epoch in range(1, n_epochs + 1):
        agent, record = dystil_epoch(agent, context, epoch, frames)
        frames = record.frames
        record.validation_return = validate(agent)
        points.append((frames, record.validation_return))
        records.append(record)
        improved = record.validation_return > best_return
        if improved:
            best_return = record.validation_return
        if run_dir is not None:
            run_dir.append_strategy_record(record.to_dict())
            stats = record.update
            run_dir.add_train_row(
                mode,
                frames,
                mean_return=record.mean_return,
                policy_loss=stats.policy_loss,
                value_loss=stats.value_loss,
                entropy=stats.entropy,
                clip_fraction=stats.clip_fraction,
                validation_return=record.validation_return,
            )
            if improved:
                save_checkpoint(agent, run_dir.checkpoint(CHECKPOINT_BEST), extra={"frames": frames})

    if run_dir is not None:
        save_checkpoint(agent, run_dir.checkpoint(CHECKPOINT_FINAL), extra={"frames": frames})
        curve = run_dir.write_curve()
    else:
        curve = sample_efficiency_curve(points)
    _LOGGER.info("Training done after %d frames, best validation return %.4f", frames, best_return)
    return TrainingResult(
        agent=agent, records=records, bc_losses=bc_losses, curve=curve, best_validation_return=best_return
    )
