"""Run configuration: voluptuous schemas per section and typed views."""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional, Union

import voluptuous as vol

from .const import (
    CONF_API_KEY_ENV_VAR,
    CONF_BASE_URL,
    CONF_BATCH_SIZE,
    CONF_BC,
    CONF_CLIP_EPS,
    CONF_DYSTIL,
    CONF_ENTROPY_COEFF,
    CONF_ENV,
    CONF_ENV_KIND,
    CONF_EPOCHS,
    CONF_EVAL_EPISODES,
    CONF_FRAMES_PER_WORKER,
    CONF_GAE_LAMBDA,
    CONF_GAMMA,
    CONF_HISTORY,
    CONF_K,
    CONF_LEARNING_RATE,
    CONF_LLM,
    CONF_LLM_MODE,
    CONF_MAX_GRAD_NORM,
    CONF_MAX_RETRIES,
    CONF_MAX_STEPS,
    CONF_MODE,
    CONF_MODEL_NAME,
    CONF_N_EPOCHS,
    CONF_NORMALIZE_ADVANTAGES,
    CONF_NUM_DEMOS,
    CONF_NUM_WORKERS,
    CONF_OUT_DIR,
    CONF_PPO,
    CONF_RUN,
    CONF_SCRIPT_PATH,
    CONF_SEED,
    CONF_TEMPERATURE,
    CONF_TEST_EPISODES,
    CONF_TIMEOUT,
    CONF_TOTAL_FRAMES,
    CONF_VALIDATION_EPISODES,
    CONF_VALUE_COEFF,
    DEFAULT_API_KEY_ENV_VAR,
    DEFAULT_BASE_URL,
    DEFAULT_BC_BATCH_SIZE,
    DEFAULT_BC_EPOCHS,
    DEFAULT_BC_LEARNING_RATE,
    DEFAULT_CLIP_EPS,
    DEFAULT_ENTROPY_COEFF,
    DEFAULT_EVAL_EPISODES,
    DEFAULT_FRAMES_PER_WORKER,
    DEFAULT_GAE_LAMBDA,
    DEFAULT_GAMMA,
    DEFAULT_HISTORY,
    DEFAULT_K,
    DEFAULT_MAX_GRAD_NORM,
    DEFAULT_MAX_RETRIES,
    DEFAULT_MODEL_NAME,
    DEFAULT_NUM_DEMOS,
    DEFAULT_NUM_WORKERS,
    DEFAULT_OUT_DIR,
    DEFAULT_PPO_BATCH_SIZE,
    DEFAULT_PPO_EPOCHS,
    DEFAULT_PPO_LEARNING_RATE,
    DEFAULT_SEED,
    DEFAULT_TEMPERATURE,
    DEFAULT_TEST_EPISODES,
    DEFAULT_TIMEOUT,
    DEFAULT_TOTAL_FRAMES,
    DEFAULT_VALIDATION_EPISODES,
    DEFAULT_VALUE_COEFF,
    ENV_DYNAMIC_OBSTACLES,
    ENV_KINDS,
    LLM_MODE_MOCK,
    LLM_MODE_REMOTE,
    MODE_DYSTIL,
    MODES,
)
from .error import ConfigError
from .gridworld import EnvConfig

_LOGGER = logging.getLogger(__name__)

PositiveInt = vol.All(vol.Coerce(int), vol.Range(min=1))
NonNegativeInt = vol.All(vol.Coerce(int), vol.Range(min=0))
PositiveFloat = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))
NonNegativeFloat = vol.All(vol.Coerce(float), vol.Range(min=0))

ENV_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_ENV_KIND, default=ENV_DYNAMIC_OBSTACLES): vol.In(ENV_KINDS),
        vol.Optional(CONF_MAX_STEPS, default=None): vol.Any(None, PositiveInt),
        vol.Optional(CONF_SEED, default=DEFAULT_SEED): NonNegativeInt,
        vol.Optional(CONF_HISTORY, default=DEFAULT_HISTORY): NonNegativeInt,
        vol.Optional(CONF_NUM_DEMOS, default=DEFAULT_NUM_DEMOS): NonNegativeInt,
    }
)

BC_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_EPOCHS, default=DEFAULT_BC_EPOCHS): PositiveInt,
        vol.Optional(CONF_BATCH_SIZE, default=DEFAULT_BC_BATCH_SIZE): PositiveInt,
        vol.Optional(CONF_LEARNING_RATE, default=DEFAULT_BC_LEARNING_RATE): PositiveFloat,
        vol.Optional(CONF_ENTROPY_COEFF, default=DEFAULT_ENTROPY_COEFF): NonNegativeFloat,
    }
)

PPO_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_GAMMA, default=DEFAULT_GAMMA): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=1, min_included=False)
        ),
        vol.Optional(CONF_GAE_LAMBDA, default=DEFAULT_GAE_LAMBDA): vol.All(vol.Coerce(float), vol.Range(min=0, max=1)),
        vol.Optional(CONF_CLIP_EPS, default=DEFAULT_CLIP_EPS): PositiveFloat,
        vol.Optional(CONF_EPOCHS, default=DEFAULT_PPO_EPOCHS): PositiveInt,
        vol.Optional(CONF_ENTROPY_COEFF, default=DEFAULT_ENTROPY_COEFF): NonNegativeFloat,
        vol.Optional(CONF_VALUE_COEFF, default=DEFAULT_VALUE_COEFF): NonNegativeFloat,
        vol.Optional(CONF_BATCH_SIZE, default=DEFAULT_PPO_BATCH_SIZE): PositiveInt,
        vol.Optional(CONF_LEARNING_RATE, default=DEFAULT_PPO_LEARNING_RATE): PositiveFloat,
        vol.Optional(CONF_NUM_WORKERS, default=DEFAULT_NUM_WORKERS): PositiveInt,
        vol.Optional(CONF_FRAMES_PER_WORKER, default=DEFAULT_FRAMES_PER_WORKER): PositiveInt,
        vol.Optional(CONF_TOTAL_FRAMES, default=DEFAULT_TOTAL_FRAMES): PositiveInt,
        vol.Optional(CONF_MAX_GRAD_NORM, default=DEFAULT_MAX_GRAD_NORM): vol.Any(None, PositiveFloat),
        vol.Optional(CONF_NORMALIZE_ADVANTAGES, default=True): vol.Boolean(),
    }
)

DYSTIL_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_K, default=DEFAULT_K): PositiveInt,
        vol.Optional(CONF_N_EPOCHS, default=None): vol.Any(None, NonNegativeInt),
        vol.Optional(CONF_EVAL_EPISODES, default=DEFAULT_EVAL_EPISODES): PositiveInt,
        vol.Optional(CONF_MODE, default=MODE_DYSTIL): vol.All(
            vol.Coerce(str), lambda value: value.replace("-", "_"), vol.In(MODES)
        ),
    }
)

LLM_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_LLM_MODE, default=LLM_MODE_MOCK): vol.In([LLM_MODE_MOCK, LLM_MODE_REMOTE]),
        vol.Optional(CONF_BASE_URL, default=DEFAULT_BASE_URL): vol.Url(),
        vol.Optional(CONF_MODEL_NAME, default=DEFAULT_MODEL_NAME): str,
        vol.Optional(CONF_API_KEY_ENV_VAR, default=DEFAULT_API_KEY_ENV_VAR): str,
        vol.Optional(CONF_TIMEOUT, default=DEFAULT_TIMEOUT): PositiveFloat,
        vol.Optional(CONF_MAX_RETRIES, default=DEFAULT_MAX_RETRIES): NonNegativeInt,
        vol.Optional(CONF_TEMPERATURE, default=DEFAULT_TEMPERATURE): NonNegativeFloat,
        vol.Optional(CONF_SCRIPT_PATH, default=None): vol.Any(None, str),
    }
)

RUN_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_OUT_DIR, default=DEFAULT_OUT_DIR): str,
        vol.Optional(CONF_VALIDATION_EPISODES, default=DEFAULT_VALIDATION_EPISODES): PositiveInt,
        vol.Optional(CONF_TEST_EPISODES, default=DEFAULT_TEST_EPISODES): PositiveInt,
    }
)

RUN_CONFIG_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_ENV, default={}): ENV_SCHEMA,
        vol.Optional(CONF_BC, default={}): BC_SCHEMA,
        vol.Optional(CONF_PPO, default={}): PPO_SCHEMA,
        vol.Optional(CONF_DYSTIL, default={}): DYSTIL_SCHEMA,
        vol.Optional(CONF_LLM, default={}): LLM_SCHEMA,
        vol.Optional(CONF_RUN, default={}): RUN_SCHEMA,
    }
)


@dataclass(frozen=True)
class BcConfig:
    epochs: int = DEFAULT_BC_EPOCHS
    batch_size: int = DEFAULT_BC_BATCH_SIZE
    learning_rate: float = DEFAULT_BC_LEARNING_RATE
    entropy_coeff: float = DEFAULT_ENTROPY_COEFF

    def __post_init__(self):
        if min(self.epochs, self.batch_size) < 1 or self.learning_rate <= 0 or self.entropy_coeff < 0:
            raise ConfigError(f"Invalid BC config {self}")


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = DEFAULT_GAMMA
    gae_lambda: float = DEFAULT_GAE_LAMBDA
    clip_eps: float = DEFAULT_CLIP_EPS
    epochs: int = DEFAULT_PPO_EPOCHS
    entropy_coeff: float = DEFAULT_ENTROPY_COEFF
    value_coeff: float = DEFAULT_VALUE_COEFF
    batch_size: int = DEFAULT_PPO_BATCH_SIZE
    learning_rate: float = DEFAULT_PPO_LEARNING_RATE
    num_workers: int = DEFAULT_NUM_WORKERS
    frames_per_worker: int = DEFAULT_FRAMES_PER_WORKER
    total_frames: int = DEFAULT_TOTAL_FRAMES
    max_grad_norm: Optional[float] = DEFAULT_MAX_GRAD_NORM
    normalize_advantages: bool = True

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0 <= self.gae_lambda <= 1:
            raise ConfigError(f"gae_lambda must be in [0, 1], got {self.gae_lambda}")
        if self.clip_eps <= 0:
            raise ConfigError(f"clip_eps must be positive, got {self.clip_eps}")

    @property
    def buffer_size(self) -> int:
        """T, the number of frames per experience buffer."""
        return self.num_workers * self.frames_per_worker

    @property
    def buffers_for_budget(self) -> int:
        """Experience buffers needed to collect at least `total_frames` frames."""
        return -(-self.total_frames // self.buffer_size)


@dataclass(frozen=True)
class DystilConfig:
    k: int = DEFAULT_K
    n_epochs: Optional[int] = None
    eval_episodes: int = DEFAULT_EVAL_EPISODES
    mode: str = MODE_DYSTIL

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"Unknown mode {self.mode!r}, expected one of {MODES}")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be at least 1")
        if self.k < 1:
            raise ConfigError("k must be at least 1")


@dataclass(frozen=True)
class LlmConfig:
    mode: str = LLM_MODE_MOCK
    base_url: str = DEFAULT_BASE_URL
    model_name: str = DEFAULT_MODEL_NAME
    api_key_env_var: str = DEFAULT_API_KEY_ENV_VAR
    timeout: float = DEFAULT_TIMEOUT
    max_retries: int = DEFAULT_MAX_RETRIES
    temperature: float = DEFAULT_TEMPERATURE
    script_path: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration of one run."""

    env: EnvConfig
    history: int
    num_demos: int
    bc: BcConfig
    ppo: PpoConfig
    dystil: DystilConfig
    llm: LlmConfig
    out_dir: str = DEFAULT_OUT_DIR
    validation_episodes: int = DEFAULT_VALIDATION_EPISODES
    test_episodes: int = DEFAULT_TEST_EPISODES

    @property
    def seed(self) -> int:
        return self.env.seed

    def to_dict(self) -> dict[str, Any]:
        return {
            CONF_ENV: {
                CONF_ENV_KIND: self.env.env_kind,
                CONF_MAX_STEPS: self.env.max_steps,
                CONF_SEED: self.env.seed,
                CONF_HISTORY: self.history,
                CONF_NUM_DEMOS: self.num_demos,
            },
            CONF_BC: asdict(self.bc),
            CONF_PPO: asdict(self.ppo),
            CONF_DYSTIL: asdict(self.dystil),
            CONF_LLM: asdict(self.llm),
            CONF_RUN: {
                CONF_OUT_DIR: self.out_dir,
                CONF_VALIDATION_EPISODES: self.validation_episodes,
                CONF_TEST_EPISODES: self.test_episodes,
            },
        }

    def snapshot(self) -> str:
        """Canonical JSON text of the resolved config."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def validate_config(data: Optional[dict[str, Any]]) -> dict[str, Any]:
    """Validate a raw config document and fill in defaults."""
    try:
        return RUN_CONFIG_SCHEMA(data or {})
    except vol.Invalid as err:
        raise ConfigError(f"Invalid config: {err}") from err


def build_run_config(data: Optional[dict[str, Any]] = None, overrides: Optional[dict[str, dict]] = None) -> RunConfig:
    """
    Build a RunConfig from a raw document.

    `overrides` is a section -> {key: value} mapping applied before validation (CLI flags).
    """
    raw = json.loads(json.dumps(data or {}))
    for section, values in (overrides or {}).items():
        for key, value in values.items():
            if value is not None:
                raw.setdefault(section, {})[key] = value

    conf = validate_config(raw)
    env = conf[CONF_ENV]
    run = conf[CONF_RUN]
    return RunConfig(
        env=EnvConfig(env_kind=env[CONF_ENV_KIND], seed=env[CONF_SEED], max_steps=env[CONF_MAX_STEPS]),
        history=env[CONF_HISTORY],
        num_demos=env[CONF_NUM_DEMOS],
        bc=BcConfig(**conf[CONF_BC]),
        ppo=PpoConfig(**conf[CONF_PPO]),
        dystil=DystilConfig(**conf[CONF_DYSTIL]),
        llm=LlmConfig(**conf[CONF_LLM]),
        out_dir=run[CONF_OUT_DIR],
        validation_episodes=run[CONF_VALIDATION_EPISODES],
        test_episodes=run[CONF_TEST_EPISODES],
    )


def load_run_config(path: Optional[Union[str, Path]], overrides: Optional[dict[str, dict]] = None) -> RunConfig:
    """Load and validate a JSON config file; a missing path means all defaults."""
    data = {}
    if path is not None:
        _LOGGER.debug("Loading config from %s", path)
        try:
            with open(path) as configfile:
                data = json.load(configfile)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path} is not valid JSON: {err}") from err
    return build_run_config(data, overrides)
