"""Common constants."""

DOMAIN = "strategyrl"

ENV_DYNAMIC_OBSTACLES = "DynamicObstacles6x6"
ENV_UNLOCK_PICKUP = "UnlockPickup"
ENV_KEY_CORRIDOR = "KeyCorridorS3R2"
ENV_PUT_NEXT = "PutNextS5N2"

ENV_KINDS = [ENV_DYNAMIC_OBSTACLES, ENV_UNLOCK_PICKUP, ENV_KEY_CORRIDOR, ENV_PUT_NEXT]

# Display names used in prompts
ENV_NAMES = {
    ENV_DYNAMIC_OBSTACLES: "Dynamic Obstacles",
    ENV_UNLOCK_PICKUP: "Unlock Pickup",
    ENV_KEY_CORRIDOR: "Key Corridor",
    ENV_PUT_NEXT: "Put Next",
}

DEFAULT_MAX_STEPS = {
    ENV_DYNAMIC_OBSTACLES: 144,
    ENV_UNLOCK_PICKUP: 60,
    ENV_KEY_CORRIDOR: 60,
    ENV_PUT_NEXT: 60,
}

ACTION_LEFT = "left turn"
ACTION_RIGHT = "right turn"
ACTION_FORWARD = "move forward"
ACTION_PICKUP = "pickup"
ACTION_DROP = "drop"
ACTION_TOGGLE = "toggle"

NAVIGATION_ACTIONS = [ACTION_LEFT, ACTION_RIGHT, ACTION_FORWARD]
ALL_ACTIONS = NAVIGATION_ACTIONS + [ACTION_PICKUP, ACTION_DROP, ACTION_TOGGLE]

ENV_ACTIONS = {
    ENV_DYNAMIC_OBSTACLES: NAVIGATION_ACTIONS,
    ENV_UNLOCK_PICKUP: ALL_ACTIONS,
    ENV_KEY_CORRIDOR: ALL_ACTIONS,
    ENV_PUT_NEXT: ALL_ACTIONS,
}

VIEW_SIZE = 7
DYNAMIC_OBSTACLE_COUNT = 3

MODE_DYSTIL = "dystil"
MODE_STATIC = "static"
MODE_NO_STRATEGY = "no_strategy"
MODES = [MODE_DYSTIL, MODE_STATIC, MODE_NO_STRATEGY]

LLM_MODE_REMOTE = "remote"
LLM_MODE_MOCK = "mock"

# Config sections
CONF_ENV = "env"
CONF_BC = "bc"
CONF_PPO = "ppo"
CONF_DYSTIL = "dystil"
CONF_LLM = "llm"
CONF_RUN = "run"

# env
CONF_ENV_KIND = "env_kind"
CONF_MAX_STEPS = "max_steps"
CONF_SEED = "seed"
CONF_HISTORY = "history"
CONF_NUM_DEMOS = "num_demos"

# bc
CONF_EPOCHS = "epochs"
CONF_BATCH_SIZE = "batch_size"
CONF_LEARNING_RATE = "learning_rate"
CONF_ENTROPY_COEFF = "entropy_coeff"

# ppo
CONF_GAMMA = "gamma"
CONF_GAE_LAMBDA = "gae_lambda"
CONF_CLIP_EPS = "clip_eps"
CONF_VALUE_COEFF = "value_coeff"
CONF_NUM_WORKERS = "num_workers"
CONF_FRAMES_PER_WORKER = "frames_per_worker"
CONF_TOTAL_FRAMES = "total_frames"
CONF_MAX_GRAD_NORM = "max_grad_norm"
CONF_NORMALIZE_ADVANTAGES = "normalize_advantages"

# dystil
CONF_K = "k"
CONF_N_EPOCHS = "n_epochs"
CONF_EVAL_EPISODES = "eval_episodes"
CONF_MODE = "mode"

# llm
CONF_LLM_MODE = "mode"
CONF_BASE_URL = "base_url"
CONF_MODEL_NAME = "model_name"
CONF_API_KEY_ENV_VAR = "api_key_env_var"
CONF_TIMEOUT = "timeout"
CONF_MAX_RETRIES = "max_retries"
CONF_TEMPERATURE = "temperature"
CONF_SCRIPT_PATH = "script_path"

# run
CONF_OUT_DIR = "out_dir"
CONF_VALIDATION_EPISODES = "validation_episodes"
CONF_TEST_EPISODES = "test_episodes"

DEFAULT_SEED = 0
DEFAULT_HISTORY = 2
DEFAULT_NUM_DEMOS = 5

DEFAULT_BC_EPOCHS = 10
DEFAULT_BC_BATCH_SIZE = 16
DEFAULT_BC_LEARNING_RATE = 1e-4
DEFAULT_ENTROPY_COEFF = 0.01

DEFAULT_GAMMA = 0.99
DEFAULT_GAE_LAMBDA = 0.95
DEFAULT_CLIP_EPS = 0.2
DEFAULT_PPO_EPOCHS = 4
DEFAULT_VALUE_COEFF = 0.5
DEFAULT_PPO_BATCH_SIZE = 32
DEFAULT_PPO_LEARNING_RATE = 1e-5
DEFAULT_NUM_WORKERS = 4
DEFAULT_FRAMES_PER_WORKER = 128
DEFAULT_TOTAL_FRAMES = 10000
DEFAULT_MAX_GRAD_NORM = 0.5

DEFAULT_K = 10
DEFAULT_EVAL_EPISODES = 20

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL_NAME = "gpt-4o"
DEFAULT_API_KEY_ENV_VAR = "OPENAI_API_KEY"
DEFAULT_TIMEOUT = 60
DEFAULT_MAX_RETRIES = 3
DEFAULT_TEMPERATURE = 0.0
DEFAULT_BACKOFF_BASE = 1.0

DEFAULT_OUT_DIR = "run"
DEFAULT_VALIDATION_EPISODES = 20
DEFAULT_TEST_EPISODES = 100

CRITIC_HIDDEN_SIZE = 1024

# Seed ranges, kept disjoint so that evaluation never sees a training layout
ACCEPTANCE_SEED_BASE = 10_000
VALIDATION_SEED_BASE = 20_000
TEST_SEED_BASE = 30_000
TRAINING_SEED_LOW = 100_000
TRAINING_SEED_HIGH = 2**31 - 1

# Run directory layout
FILE_CONFIG_SNAPSHOT = "config.snapshot"
FILE_DEMOS = "demos.jsonl"
FILE_STRATEGY_LOG = "strategies.log.jsonl"
FILE_TRAIN_CSV = "train.csv"
FILE_CURVE_CSV = "curve.csv"
FILE_EVAL_REPORT = "eval.report"
FILE_BC_LOSS_CSV = "bc_loss.csv"
FILE_LLM_AUDIT = "llm_audit.jsonl"
DIR_CHECKPOINTS = "checkpoints"

CHECKPOINT_BC = "bc.pt"
CHECKPOINT_BEST = "best.pt"
CHECKPOINT_FINAL = "final.pt"

EMPTY_STRATEGIES_SENTINEL = "(none yet)"
