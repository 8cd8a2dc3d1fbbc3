"""Command line entry point."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .bc import bc_train, imitation_accuracy
from .config import RunConfig, load_run_config
from .const import (
    CHECKPOINT_BC,
    CONF_DYSTIL,
    CONF_ENV,
    CONF_ENV_KIND,
    CONF_LLM,
    CONF_LLM_MODE,
    CONF_MODE,
    CONF_OUT_DIR,
    CONF_RUN,
    CONF_SCRIPT_PATH,
    CONF_SEED,
    CONF_TEST_EPISODES,
    ENV_KINDS,
    LLM_MODE_MOCK,
    MODE_NO_STRATEGY,
    MODES,
    TEST_SEED_BASE,
)
from .dystil import build_agent, induce_initial_strategies, run
from .error import StrategyRLError
from .harness import RunDirectory, evaluate, format_strategy_log
from .llm_client import LlmEndpoint, StrategyClient
from .policy import load_checkpoint, save_checkpoint
from .trajectory import Demonstration, read_demonstrations, record_demonstrations, write_demonstrations
from .util import get_version, make_torch_generator

_LOGGER = logging.getLogger(__name__)

MODE_CHOICES = MODES + [mode.replace("_", "-") for mode in MODES if "_" in mode]


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="root seed")
    parser.add_argument("--env", choices=ENV_KINDS, help="environment kind")
    parser.add_argument("--mock", metavar="SCRIPT", help="answer LLM queries from a mock script")
    parser.add_argument("--out-dir", help="run directory")
    parser.add_argument("--debug", action="store_true", help="debug logging")
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="strategyrl", description="Strategy-conditioned reinforcement learning")
    parser.add_argument("--version", action="version", version=f"%(prog)s {get_version()}")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("record-demos", parents=[common], help="record expert demonstrations")

    induce = commands.add_parser("induce", parents=[common], help="induce the initial strategy list")
    induce.add_argument("--output", help="also write the list to this file")

    commands.add_parser("bc-train", parents=[common], help="induce strategies and run behavioral cloning")

    train = commands.add_parser("train", parents=[common], help="full training run")
    train.add_argument("--mode", choices=MODE_CHOICES, help="training mode")

    evaluate_cmd = commands.add_parser("eval", parents=[common], help="evaluate a checkpoint on test seeds")
    evaluate_cmd.add_argument("--episodes", type=int, help="number of test episodes")
    evaluate_cmd.add_argument("--checkpoint", help="checkpoint file, defaults to the run's final checkpoint")

    inspect = commands.add_parser("inspect-strategies", parents=[common], help="print the strategy evolution log")
    inspect.add_argument("run_dir", nargs="?", help="run directory, defaults to --out-dir")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, dict]:
    return {
        CONF_ENV: {CONF_SEED: args.seed, CONF_ENV_KIND: args.env},
        CONF_LLM: {
            CONF_LLM_MODE: LLM_MODE_MOCK if args.mock else None,
            CONF_SCRIPT_PATH: args.mock,
        },
        CONF_DYSTIL: {CONF_MODE: getattr(args, "mode", None)},
        CONF_RUN: {
            CONF_OUT_DIR: args.out_dir,
            CONF_TEST_EPISODES: getattr(args, "episodes", None),
        },
    }


def _client(config: RunConfig, run_dir: RunDirectory) -> StrategyClient:
    return StrategyClient(LlmEndpoint.from_config(config.llm), audit_path=run_dir.llm_audit)


def _demos(config: RunConfig, run_dir: RunDirectory) -> list[Demonstration]:
    """Demonstrations of the run directory, recorded on first use."""
    if run_dir.demos.exists():
        demos = read_demonstrations(run_dir.demos)
        if demos and demos[0].env_kind == config.env.env_kind:
            return demos
        _LOGGER.warning("%s holds demonstrations for another environment, recording new ones", run_dir.demos)
    demos = record_demonstrations(config.env, config.num_demos)
    write_demonstrations(run_dir.demos, demos)
    _LOGGER.info("Recorded %d demonstrations to %s", len(demos), run_dir.demos)
    return demos


def cmd_record_demos(config: RunConfig, run_dir: RunDirectory, args: argparse.Namespace) -> int:
    demos = record_demonstrations(config.env, config.num_demos)
    write_demonstrations(run_dir.demos, demos)
    print(f"Recorded {len(demos)} demonstrations to {run_dir.demos}")
    return 0


def cmd_induce(config: RunConfig, run_dir: RunDirectory, args: argparse.Namespace) -> int:
    strategies = induce_initial_strategies(config.env.env_kind, _demos(config, run_dir), _client(config, run_dir))
    if args.output:
        Path(args.output).write_text(strategies.text + "\n")
    print(strategies.text)
    return 0


def cmd_bc_train(config: RunConfig, run_dir: RunDirectory, args: argparse.Namespace) -> int:
    demos = _demos(config, run_dir)
    agent = build_agent(config.env.env_kind, config.history, config.seed)
    if config.dystil.mode != MODE_NO_STRATEGY:
        agent.with_memory(induce_initial_strategies(config.env.env_kind, demos, _client(config, run_dir)))
    agent, losses = bc_train(
        agent, demos, config.bc, generator=make_torch_generator(config.seed, "bc"), loss_csv=run_dir.bc_loss_csv
    )
    save_checkpoint(agent, run_dir.checkpoint(CHECKPOINT_BC))
    print(f"Final BC loss {losses[-1]:.4f}, imitation accuracy {imitation_accuracy(agent, demos):.2%}")
    return 0


def cmd_train(config: RunConfig, run_dir: RunDirectory, args: argparse.Namespace) -> int:
    run_dir.write_config_snapshot(config)
    demos = _demos(config, run_dir)
    client = None if config.dystil.mode == MODE_NO_STRATEGY else _client(config, run_dir)
    result = run(config, demos, client, run_dir)
    calls = client.call_count if client is not None else 0
    print(
        f"Trained for {result.records[-1].frames} frames, best validation return "
        f"{result.best_validation_return:.4f}, {calls} LLM calls"
    )
    return 0


def cmd_eval(config: RunConfig, run_dir: RunDirectory, args: argparse.Namespace) -> int:
    agent = load_checkpoint(args.checkpoint or run_dir.checkpoint())
    report = evaluate(agent, config.env, config.test_episodes, seed_base=TEST_SEED_BASE)
    run_dir.write_eval_report(report)
    print(f"Mean return {report.mean_return:.4f}, success rate {report.success_rate:.2%} over {report.n_episodes}")
    return 0


def cmd_inspect_strategies(config: RunConfig, run_dir: RunDirectory, args: argparse.Namespace) -> int:
    target = RunDirectory(args.run_dir) if args.run_dir else run_dir
    print(format_strategy_log(target.read_strategy_log()), end="")
    return 0


COMMANDS = {
    "record-demos": cmd_record_demos,
    "induce": cmd_induce,
    "bc-train": cmd_bc_train,
    "train": cmd_train,
    "eval": cmd_eval,
    "inspect-strategies": cmd_inspect_strategies,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_run_config(args.config, _overrides(args))
        run_dir = RunDirectory(config.out_dir)
        if args.command != "inspect-strategies":
            run_dir.ensure()
        return COMMANDS[args.command](config, run_dir, args)
    except (StrategyRLError, OSError) as err:
        _LOGGER.error("%s failed: %s", args.command, err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
