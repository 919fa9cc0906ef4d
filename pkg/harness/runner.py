"""Training loop: act, maybe get advice, learn, evaluate.

One run is single-threaded and its outputs are a pure function of the
configuration (seed included). Steps are numbered from 1; periodic work
fires when ``step % interval == 0``. An evaluation is taken before the
first step and after every ``eval_interval`` steps.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from advising.strategies import AdviceContext, make_strategy
from agent.dqn import DqnAgent, DuelingQNet, epsilon_greedy
from agent.replay import Transition
from core.config import (
    CHECKPOINT_DIR,
    CONFIG_FILE,
    METRICS_FILE,
    TRACE_FILE,
    ExperimentConfig,
    save_config,
)
from core.errors import BudgetExhaustedError
from env.gridworld import N_ACTIONS, GridWorld
from env.maps import make_env
from harness.metrics import EvalPoint, RunMetrics, TraceWriter, write_metrics

log = logging.getLogger("a7.runner")

Policy = Callable[[np.ndarray], int]


@dataclass
class AdviceLedger:
    """Teacher budget and advice usage counters."""

    budget: int
    teacher_queries: int = 0
    reuse_firings: int = 0

    @property
    def remaining(self) -> int:
        return self.budget - self.teacher_queries

    def record_teacher(self) -> None:
        if self.remaining <= 0:
            raise BudgetExhaustedError(f"advice budget of {self.budget} already spent")
        self.teacher_queries += 1

    def record_reuse(self) -> None:
        self.reuse_firings += 1


def greedy_policy(net: DuelingQNet) -> Policy:
    return lambda state: int(np.argmax(net.q_values(state)))


def teacher_policy(env: GridWorld) -> Policy:
    """Shortest-path teacher acting in ``env`` itself."""
    return lambda state: int(env.teacher_action())


def evaluate(policy: Policy, env: GridWorld, episodes: int) -> float:
    """Mean undiscounted return of ``policy`` over fresh episodes; no learning."""
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    total = 0.0
    for _ in range(episodes):
        state = env.reset()
        done = False
        while not done:
            state, reward, done = env.step(policy(state))
            total += reward
    return total / episodes


def run_training(config: ExperimentConfig, run_dir: Path | None = None) -> RunMetrics:
    """Train one student under the configured advising strategy.

    With ``run_dir`` set, the config, metrics, optional trace and
    checkpoints are written there.
    """
    seeds = np.random.SeedSequence(config.run.seed).spawn(4)
    agent_seed = int(seeds[0].generate_state(1)[0])
    act_rng = np.random.default_rng(seeds[1])
    replay_rng = np.random.default_rng(seeds[2])
    strategy_rng = np.random.default_rng(seeds[3])

    env = make_env(config.env)
    eval_env = env.clone()
    agent = DqnAgent(config.agent, env.observation_size, N_ACTIONS, agent_seed)
    strategy = make_strategy(config, env.observation_size, N_ACTIONS, strategy_rng)
    ledger = AdviceLedger(config.advising.budget)
    metrics = RunMetrics(teacher_score=config.run.teacher_score)
    policy = greedy_policy(agent.online)

    trace: TraceWriter | None = None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        save_config(config, run_dir / CONFIG_FILE)
        if config.run.trace:
            trace = TraceWriter.open(run_dir / TRACE_FILE)

    log.info(
        "run started: %s, seed %d, budget %d",
        strategy.name.value, config.run.seed, ledger.budget,
        extra={"seed": config.run.seed, "strategy": strategy.name.value},
    )

    def record_eval(step: int) -> None:
        score = evaluate(policy, eval_env, config.run.eval_episodes)
        metrics.add(EvalPoint(step, score, ledger.teacher_queries, ledger.reuse_firings))
        log.info(
            "step %d: eval score %.3f", step, score,
            extra={
                "step": step,
                "score": score,
                "teacher_queries": ledger.teacher_queries,
                "reuse_firings": ledger.reuse_firings,
            },
        )

    try:
        record_eval(0)
        state = env.reset()
        for step in range(1, config.run.total_steps + 1):
            q = agent.q_values(state)
            action = epsilon_greedy(q, agent.epsilon(step), act_rng)
            ctx = AdviceContext(step, state, q, ledger.remaining)

            decision = strategy.observe(ctx)
            advised = False
            bonus = 0.0
            if decision.advise and ledger.remaining > 0:
                action = int(env.teacher_action())
                ledger.record_teacher()
                bonus = strategy.on_teacher_advice(ctx, action)
                advised = True
            else:
                reused = strategy.reuse(ctx)
                if reused is not None:
                    action, bonus = reused
                    ledger.record_reuse()
                    advised = True

            next_state, reward, terminal = env.step(action)
            agent.remember(
                Transition(state, action, reward + bonus, next_state, terminal, advised)
            )
            if agent.replay.ready:
                agent.train_step(replay_rng)
            strategy.on_step_end(step, agent, ledger.remaining)

            if trace is not None:
                trace.write(step, decision.score, decision.threshold, advised)
            state = env.reset() if terminal else next_state
            if step % config.run.eval_interval == 0:
                record_eval(step)
    finally:
        if trace is not None:
            trace.close()

    log.info(
        "run finished: auc %.4f", metrics.auc,
        extra={
            "auc": metrics.auc,
            "best_score": metrics.best_score,
            "teacher_queries": ledger.teacher_queries,
            "reuse_firings": ledger.reuse_firings,
        },
    )

    if run_dir is not None:
        write_metrics(metrics, run_dir / METRICS_FILE)
        if config.run.save_checkpoints:
            checkpoints = run_dir / CHECKPOINT_DIR
            agent.save(
                checkpoints / "agent",
                {"strategy": strategy.name.value, "seed": config.run.seed},
            )
            strategy.save(checkpoints)
    return metrics
