#!/usr/bin/env python3
"""
A7 CLI - train and evaluate budgeted action-advising students.

Usage:
    a7 run --config experiment.ini
    a7 run --config experiment.ini --strategy ea --seed 3 --budget 1000
    a7 eval --checkpoint runs/a7-b5000-seed1/checkpoints/agent --episodes 20
    a7 sweep --seeds 1..5 --strategies a7,ea,na --workers 4
    a7 init-config experiment.ini

Config: sectioned key = value file; any key can also be set through the
environment as A7_<SECTION>__<KEY> (e.g. A7_RUN__TOTAL_STEPS=5000).
"""

import sys
from pathlib import Path
from typing import Any

from core.config import (
    CHECKPOINT_DIR,
    LOG_FILE,
    RUNS_DIR,
    SUMMARY_FILE,
    ExperimentConfig,
    StrategyName,
    apply_overrides,
    build_config,
    load_config,
    save_config,
)
from core.errors import A7Error, ConfigError
from core.logging import setup_logging

# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _print_status(msg):
    print(f"\033[36m[a7]\033[0m {msg}")

def _print_error(msg):
    print(f"\033[31m[a7 error]\033[0m {msg}", file=sys.stderr)


def _base_config(path: str | None) -> ExperimentConfig:
    return load_config(Path(path)) if path else build_config()


def _overrides(args: Any) -> dict[str, dict[str, Any]]:
    return {
        "advising": {
            "strategy": getattr(args, "strategy", None),
            "budget": getattr(args, "budget", None),
        },
        "run": {
            "seed": getattr(args, "seed", None),
            "total_steps": getattr(args, "steps", None),
            "output_dir": getattr(args, "out", None),
            "trace": True if getattr(args, "trace", False) else None,
        },
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _do_run(args: Any) -> int:
    from harness.runner import run_training

    config = apply_overrides(_base_config(args.config), _overrides(args))
    run_dir = config.run_dir()
    setup_logging(verbose=args.verbose, log_file=run_dir / LOG_FILE)
    _print_status(
        f"Training {config.advising.strategy.value} (seed {config.run.seed}, "
        f"budget {config.advising.budget}, {config.run.total_steps} steps)"
    )
    metrics = run_training(config, run_dir)
    _print_status(f"AUC: {metrics.auc:.4f}  best eval score: {metrics.best_score:.4f}")
    _print_status(
        f"Advice used: {metrics.teacher_queries} teacher, {metrics.reuse_firings} reused"
    )
    _print_status(f"Outputs: {run_dir}")
    return 0


def _do_eval(args: Any) -> int:
    from agent.dqn import load_student
    from env.maps import load_map, make_env
    from harness.runner import evaluate, greedy_policy

    if args.episodes < 1:
        raise ConfigError(f"--episodes must be at least 1, got {args.episodes}")
    checkpoint = Path(args.checkpoint)
    net = load_student(checkpoint)
    run_config = _run_config_for(checkpoint)
    if args.env:
        env = load_map(Path(args.env)).clone(one_hot=run_config.env.one_hot_position)
    else:
        # Fall back to the map recorded next to the checkpoint's run
        env = make_env(run_config.env)
    if env.observation_size != net.input_size:
        raise ConfigError(
            f"map encodes {env.observation_size} features but the student expects "
            f"{net.input_size}"
        )
    score = evaluate(greedy_policy(net), env, args.episodes)
    _print_status(f"Mean score over {args.episodes} episodes: {score:.4f}")
    return 0


def _run_config_for(checkpoint: Path) -> ExperimentConfig:
    from core.config import CONFIG_FILE

    for parent in [checkpoint, *checkpoint.parents]:
        if parent.name == CHECKPOINT_DIR:
            candidate = parent.parent / CONFIG_FILE
            if candidate.exists():
                return load_config(candidate)
    return build_config()


def _do_sweep(args: Any) -> int:
    from harness.sweep import (
        parse_seed_range,
        parse_strategies,
        run_sweep,
        summarize,
        write_summary,
    )

    seeds = parse_seed_range(args.seeds)
    strategies = parse_strategies(args.strategies)
    overrides = _overrides(args)
    config = apply_overrides(_base_config(args.config), overrides)
    setup_logging(verbose=args.verbose)
    _print_status(f"Sweeping {len(strategies)} strategies x {len(seeds)} seeds")

    results = run_sweep(config, seeds, strategies, workers=args.workers)
    rows = summarize(results)
    summary_path = config.run.output_dir / SUMMARY_FILE
    write_summary(rows, summary_path)

    print()
    print(
        f"  {'strategy':<18} {'runs':>4} {'auc':>16} {'best':>16} {'teacher':>9} {'reused':>9}"
    )
    for row in rows:
        auc = f"{row.auc_mean:.3f} +- {row.auc_std:.3f}"
        best = f"{row.best_score_mean:.3f} +- {row.best_score_std:.3f}"
        print(
            f"  {row.strategy:<18} {row.runs:>4} {auc:>16} {best:>16} "
            f"{row.teacher_queries_mean:>9.0f} {row.reuse_firings_mean:>9.0f}"
        )
    print()
    _print_status(f"Summary: {summary_path}")
    return 0


def _do_init_config(args: Any) -> int:
    path = Path(args.path)
    if path.exists() and not args.force:
        _print_error(f"{path} already exists (use --force to overwrite)")
        return 1
    save_config(build_config(), path)
    _print_status(f"Wrote default config to {path}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main():
    import argparse
    from importlib.metadata import version as pkg_version
    try:
        __version__ = pkg_version("a7-advising")
    except Exception:
        __version__ = "dev"

    strategies = [s.value for s in StrategyName]

    parser = argparse.ArgumentParser(
        prog="a7",
        description="A7 - budgeted action advising for deep RL students"
    )
    parser.add_argument("--version", action="version", version=f"a7 {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    # a7 run
    p_run = sub.add_parser("run", help="Train one student")
    p_run.add_argument("--config", default=None, help="Config file (default: built-in)")
    p_run.add_argument("--strategy", choices=strategies, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--budget", type=int, default=None, help="Teacher advice budget")
    p_run.add_argument("--steps", type=int, default=None, help="Total environment steps")
    p_run.add_argument("--out", default=None, help=f"Output root (default: {RUNS_DIR})")
    p_run.add_argument("--trace", action="store_true", help="Write per-step trace.csv")
    p_run.add_argument("-v", "--verbose", action="store_true")

    # a7 eval
    p_eval = sub.add_parser("eval", help="Evaluate a saved student greedily")
    p_eval.add_argument("--checkpoint", required=True, help="Agent checkpoint dir or manifest")
    p_eval.add_argument("--env", default=None, help="Map file (default: the run's map)")
    p_eval.add_argument("--episodes", type=int, default=20)

    # a7 sweep
    p_sweep = sub.add_parser("sweep", help="Run several seeds and strategies")
    p_sweep.add_argument("--seeds", required=True, help="Seed range, e.g. 1..5")
    p_sweep.add_argument("--strategies", default="a7,ea,na", help="Comma-separated list")
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--budget", type=int, default=None)
    p_sweep.add_argument("--steps", type=int, default=None)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("-v", "--verbose", action="store_true")

    # a7 init-config
    p_init = sub.add_parser("init-config", help="Write the default config file")
    p_init.add_argument("path")
    p_init.add_argument("--force", action="store_true")

    args = parser.parse_args()

    commands = {
        "run": _do_run,
        "eval": _do_eval,
        "sweep": _do_sweep,
        "init-config": _do_init_config,
    }
    try:
        sys.exit(commands[args.command](args))
    except A7Error as e:
        _print_error(str(e))
        sys.exit(1)


if __name__ == "__main__":
    main()
