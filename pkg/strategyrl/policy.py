"""Strategy-conditioned actor-critic agent."""

import copy
import logging
import pickle
import re
import zlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Union

import torch
from torch import nn
import torch.nn.functional as F

from .const import CRITIC_HIDDEN_SIZE
from .error import ActionSetError, CheckpointError
from .gridworld import Action
from .strategy import EMPTY_STRATEGIES, StrategyList, format_for_prompt
from .trajectory import PseudoState, render_pseudo_state

_LOGGER = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1

TOKEN_RE = re.compile(r"[a-z]+|\d+|[^\sa-z\d]")

SPECIAL_TOKENS = ["<pad>", "<unk>"]

# Words of the environment, goal, template and action vocabulary; everything else is hashed
VOCAB_WORDS = sorted(
    set(
        """
        you see a an the carry wall step steps forward left right and door open closed locked key ball box goal
        red green blue purple yellow grey square object objects nothing observation action actions agent of
        strategies strategy to get pick up put next turn turns move moves pickup drop toggle reach avoid obstacle
        obstacles moving room rooms corridor when if is are in front not into clear safe should it its then
        before after do does at on from with without by be use using first hit collide collision penalty target
        possible unlock unlocked path shortest fewest time carrying near far away close adjacent ahead behind
        directly there no or any one two three four five
        """.split()
    )
)
PUNCTUATION = [":", ",", ".", "(", ")", "-", "'", "/"]
NUMERALS = [str(n) for n in range(21)]

VOCAB: list[str] = SPECIAL_TOKENS + VOCAB_WORDS + PUNCTUATION + [n for n in NUMERALS if n not in VOCAB_WORDS]
VOCAB_INDEX = {token: index for index, token in enumerate(VOCAB)}

UNK_BUCKETS = 256
NGRAM_BUCKETS = 8192
VOCAB_SIZE = len(VOCAB) + UNK_BUCKETS

# Fixed multiplier on the language-modeling head logits; one Adam step at lr 1e-4 moves a logit by about
# LOGIT_SCALE * 1e-4 per unit of hidden activation
LOGIT_SCALE = 100.0

# Per-head decay of the initial attention score with distance from the end of the input
RECENCY_DECAY = (1 / 4, 1 / 12, 1 / 36, 0.0)


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text.lower())


def token_id(token: str) -> int:
    index = VOCAB_INDEX.get(token)
    if index is not None:
        return index
    return len(VOCAB) + zlib.crc32(token.encode("utf-8")) % UNK_BUCKETS


@lru_cache(maxsize=65536)
def encode(text: str) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    """Token ids plus hashed bigram and trigram ids ending at each position."""
    ids = [token_id(token) for token in tokenize(text)]
    bigrams, trigrams = [], []
    prev2, prev1 = 0, 0
    for current in ids:
        bigrams.append((prev1 * 1_000_003 + current) % NGRAM_BUCKETS)
        trigrams.append(((prev2 * 1_000_003 + prev1) * 1_000_003 + current) % NGRAM_BUCKETS)
        prev2, prev1 = prev1, current
    return tuple(ids), tuple(bigrams), tuple(trigrams)


def first_token_ids(actions: Sequence[Action]) -> list[int]:
    """Vocabulary ids of the first token of each action name; names must not share a first token."""
    firsts = [action.name.split()[0].lower() if action.name.split() else "" for action in actions]
    seen: dict[str, str] = {}
    for action, first in zip(actions, firsts):
        if first in seen:
            raise ActionSetError(f"Actions {seen[first]!r} and {action.name!r} share the first token {first!r}")
        if first not in VOCAB_INDEX:
            raise ActionSetError(f"First token {first!r} of {action.name!r} is not in the vocabulary")
        seen[first] = action.name
    return [VOCAB_INDEX[first] for first in firsts]


@dataclass(frozen=True)
class ModelInput:
    text: str


def construct_input(env_description: str, strategies: StrategyList, goal: str, state: PseudoState) -> ModelInput:
    """Assemble description, strategies, goal, pseudo-state and the action prompting prefix."""
    sections = [env_description.strip()]
    if len(strategies):
        sections.append("Strategies to follow:\n" + format_for_prompt(strategies))
    lines = [f"Goal of the agent: {goal}"]
    lines.extend(render_pseudo_state(state))
    lines.append(f"Action {len(state.history) + 1}:")
    sections.append("\n".join(lines))
    return ModelInput(text="\n\n".join(sections))


@dataclass
class ActionDistribution:
    probs: torch.Tensor
    log_probs: torch.Tensor

    @property
    def entropy(self) -> torch.Tensor:
        return -(self.probs * self.log_probs).sum(dim=-1)


def action_distribution(next_token_logits: torch.Tensor, action_token_ids: Sequence[int]) -> ActionDistribution:
    """Softmax over the logits of the actions' first tokens."""
    grouped = next_token_logits[..., list(action_token_ids)]
    log_probs = F.log_softmax(grouped, dim=-1)
    return ActionDistribution(probs=log_probs.exp(), log_probs=log_probs)


class CoreReasoningModel(nn.Module):
    """
    Small trainable stand-in for a language model.

    Unigram, bigram and trigram embeddings are pooled with multi-head attention whose scores
    depend on the token and on its distance from the end of the input; a tanh projection gives w.
    """

    def __init__(self, embed_dim: int = 64, hidden_size: int = 128, heads: int = 4, max_distance: int = 1024):
        super().__init__()
        self.hidden_size = hidden_size
        self.max_distance = max_distance
        self.unigram = nn.Embedding(VOCAB_SIZE, embed_dim, padding_idx=0)
        self.bigram = nn.Embedding(NGRAM_BUCKETS, embed_dim)
        self.trigram = nn.Embedding(NGRAM_BUCKETS, embed_dim)
        self.token_score = nn.Linear(embed_dim, heads)
        self.distance_score = nn.Embedding(max_distance, heads)
        self.project = nn.Linear(heads * embed_dim, hidden_size)
        with torch.no_grad():
            distance = torch.arange(max_distance, dtype=self.distance_score.weight.dtype).unsqueeze(-1)
            decay = torch.tensor([RECENCY_DECAY[head % len(RECENCY_DECAY)] for head in range(heads)])
            self.distance_score.weight.copy_(-distance * decay)

    def batch(self, texts: Sequence[str]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        encoded = [encode(text) for text in texts]
        length = max(1, max(len(ids) for ids, _, _ in encoded))
        uni = torch.zeros(len(texts), length, dtype=torch.long)
        bi = torch.zeros_like(uni)
        tri = torch.zeros_like(uni)
        mask = torch.zeros(len(texts), length, dtype=torch.bool)
        for row, (ids, bigrams, trigrams) in enumerate(encoded):
            n = len(ids)
            if n == 0:
                continue
            uni[row, :n] = torch.tensor(ids)
            bi[row, :n] = torch.tensor(bigrams)
            tri[row, :n] = torch.tensor(trigrams)
            mask[row, :n] = True
        return uni, bi, tri, mask

    def forward(self, texts: Sequence[str]) -> torch.Tensor:
        uni, bi, tri, mask = self.batch(texts)
        embedded = self.unigram(uni) + self.bigram(bi) + self.trigram(tri)

        lengths = mask.sum(dim=1, keepdim=True)
        positions = torch.arange(uni.shape[1]).unsqueeze(0)
        distance = (lengths - 1 - positions).clamp(min=0, max=self.max_distance - 1)

        scores = self.token_score(embedded) + self.distance_score(distance)
        scores = scores.masked_fill(~mask.unsqueeze(-1), float("-inf"))
        # rows without tokens pool to zero
        weights = torch.nan_to_num(torch.softmax(scores, dim=1), nan=0.0)
        pooled = torch.einsum("blh,ble->bhe", weights, embedded).flatten(start_dim=1)
        return torch.tanh(self.project(pooled))


class LanguageModelHead(nn.Linear):
    """Vocabulary logits from the pooled hidden state, multiplied by a fixed logit scale."""

    def __init__(self, hidden_size: int, vocab_size: int = VOCAB_SIZE, logit_scale: float = LOGIT_SCALE):
        super().__init__(hidden_size, vocab_size)
        self.logit_scale = logit_scale

    def forward(self, hidden: torch.Tensor) -> torch.Tensor:
        return super().forward(hidden) * self.logit_scale


class ValueNetwork(nn.Module):
    def __init__(self, hidden_size: int, inner_size: int = CRITIC_HIDDEN_SIZE):
        super().__init__()
        self.inner = nn.Linear(hidden_size, inner_size)
        self.out = nn.Linear(inner_size, 1)

    def forward(self, w: torch.Tensor) -> torch.Tensor:
        return self.out(torch.tanh(self.inner(w))).squeeze(-1)


@dataclass
class PolicyOutput:
    distribution: ActionDistribution
    values: torch.Tensor
    hidden: torch.Tensor


class AgentModel(nn.Module):
    """
    Strategy memory, core reasoning module with its language-modeling head, and the critic.

    Memory only changes the input text; parameters only change outputs for a fixed input.
    """

    def __init__(
        self,
        env_description: str,
        actions: Sequence[Action],
        memory: StrategyList = EMPTY_STRATEGIES,
        history: int = 2,
        hidden_size: int = 128,
        embed_dim: int = 64,
        seed: int = 0,
    ):
        super().__init__()
        self.action_token_ids = first_token_ids(actions)
        self.actions = list(actions)
        self.env_description = env_description
        self.memory = memory
        self.history = history
        self.hyperparameters = {"hidden_size": hidden_size, "embed_dim": embed_dim}

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.core = CoreReasoningModel(embed_dim=embed_dim, hidden_size=hidden_size)
            self.lm_head = LanguageModelHead(hidden_size)
            self.value_net = ValueNetwork(hidden_size)
            # near-uniform initial policy: effective gain 0.01 after scaling
            nn.init.orthogonal_(self.lm_head.weight, gain=0.01 / self.lm_head.logit_scale)
            nn.init.zeros_(self.lm_head.bias)

        self.optimizer: Optional[torch.optim.Optimizer] = None

    @property
    def dtype(self) -> torch.dtype:
        return self.lm_head.weight.dtype

    def policy_parameters(self) -> list[nn.Parameter]:
        return list(self.core.parameters()) + list(self.lm_head.parameters())

    def value_parameters(self) -> list[nn.Parameter]:
        return list(self.value_net.parameters())

    def input_for(self, state: PseudoState) -> ModelInput:
        return construct_input(self.env_description, self.memory, state.goal, state)

    def core_forward(self, inputs: Sequence[ModelInput]) -> tuple[torch.Tensor, torch.Tensor]:
        """Hidden vector w and next-token logits for each input."""
        for model_input in inputs:
            if not model_input.text:
                raise ValueError("Model input is empty")
        hidden = self.core([model_input.text for model_input in inputs])
        return hidden, self.lm_head(hidden)

    def value(self, hidden: torch.Tensor) -> torch.Tensor:
        return self.value_net(hidden)

    def forward(self, states: Sequence[PseudoState]) -> PolicyOutput:
        hidden, logits = self.core_forward([self.input_for(state) for state in states])
        distribution = action_distribution(logits, self.action_token_ids)
        return PolicyOutput(distribution=distribution, values=self.value(hidden), hidden=hidden)

    @torch.no_grad()
    def act(
        self, states: Sequence[PseudoState], greedy: bool = False, generator: Optional[torch.Generator] = None
    ) -> tuple[list[Action], list[float], list[float]]:
        """Choose actions for a batch of pseudo-states; returns actions, log-probs and values."""
        output = self(states)
        probs = output.distribution.probs
        if greedy:
            choices = probs.argmax(dim=-1)
        else:
            choices = torch.multinomial(probs.float(), 1, generator=generator).squeeze(-1)
        log_probs = output.distribution.log_probs.gather(-1, choices.unsqueeze(-1)).squeeze(-1)
        return (
            [self.actions[int(index)] for index in choices],
            [float(value) for value in log_probs],
            [float(value) for value in output.values],
        )

    def with_memory(self, memory: StrategyList) -> "AgentModel":
        self.memory = memory
        return self

    def clone(self) -> "AgentModel":
        """Deep, independent copy including memory and optimizer state."""
        return copy.deepcopy(self)


def save_checkpoint(agent: AgentModel, path: Union[str, Path], extra: Optional[dict] = None) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "hyperparameters": agent.hyperparameters,
        "history": agent.history,
        "env_description": agent.env_description,
        "actions": [[action.name, action.index] for action in agent.actions],
        "memory": agent.memory.to_dict(),
        "memory_text": agent.memory.text,
        "core": agent.core.state_dict(),
        "lm_head": agent.lm_head.state_dict(),
        "value_net": agent.value_net.state_dict(),
        "extra": extra or {},
    }
    torch.save(payload, path)
    _LOGGER.debug("Saved checkpoint %s", path)


def load_checkpoint(path: Union[str, Path]) -> AgentModel:
    try:
        payload = torch.load(path, map_location="cpu")
    except (OSError, RuntimeError, EOFError, pickle.UnpicklingError) as err:
        raise CheckpointError(f"Can't read checkpoint {path}: {err}") from err
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint format {payload.get('format_version')!r} in {path}")
    agent = AgentModel(
        env_description=payload["env_description"],
        actions=[Action(name, index) for name, index in payload["actions"]],
        memory=StrategyList.from_dict(payload["memory"]),
        history=payload["history"],
        **payload["hyperparameters"],
    )
    agent.core.load_state_dict(payload["core"])
    agent.lm_head.load_state_dict(payload["lm_head"])
    agent.value_net.load_state_dict(payload["value_net"])
    return agent
