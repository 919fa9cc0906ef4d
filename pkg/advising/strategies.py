"""Student-initiated advising strategies behind one interface.

The runner owns the budget. Each step it asks the strategy for an
``AdviceDecision``; if the strategy wants advice and budget remains the
teacher's action replaces the student's, otherwise the strategy may
re-issue advice from its reuse model. Strategies return the intrinsic
reward to add to the stored transition.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from advising.byol import ActionByol
from advising.reuse import LambdaSchedule, ReuseModel, intrinsic_reward
from advising.selector import AdviceDecision, AdviceSelector
from advising.threshold import AdaptiveQueue, should_advise
from agent.dqn import DqnAgent
from core.config import ExperimentConfig, StrategyName
from core.errors import EmptyDatasetError
from nn.checkpoint import save_networks
from nn.losses import mse_loss
from nn.mlp import Mlp
from nn.optim import Adam

log = logging.getLogger("a7.advising")


@dataclass(frozen=True)
class AdviceContext:
    """What a strategy may look at when deciding on one step."""

    step: int
    state: np.ndarray
    q_values: np.ndarray
    budget_left: int


# ---------------------------------------------------------------------------
# Decision rules
# ---------------------------------------------------------------------------


def decide_ea(budget_left: int) -> bool:
    return budget_left > 0


def decide_ra(rng: np.random.Generator, budget_left: int, probability: float = 0.5) -> bool:
    # Draw even with no budget so the stream does not depend on it
    coin = rng.random() < probability
    return coin and budget_left > 0


def importance(q_values: np.ndarray) -> float:
    q = np.asarray(q_values, dtype=np.float64)
    if q.size == 0:
        raise EmptyDatasetError("importance of an empty Q vector")
    return float(q.max() - q.min())


def decide_iaa(q_values: np.ndarray, threshold: float) -> bool:
    """Advise when max(Q) - min(Q) exceeds the threshold."""
    return should_advise(importance(q_values), threshold)


class RndPair:
    """Random network distillation: a frozen random target and a trained predictor."""

    def __init__(
        self,
        input_size: int,
        hidden: int,
        output_dim: int,
        learning_rate: float,
        rng_seed: int = 0,
    ) -> None:
        seeds = np.random.SeedSequence(rng_seed).generate_state(2)
        self.target = Mlp([input_size, hidden, output_dim], rng_seed=int(seeds[0]))
        self.predictor = Mlp([input_size, hidden, output_dim], rng_seed=int(seeds[1]))
        self.optimizer = Adam([self.predictor], learning_rate)

    def novelty(self, state: np.ndarray) -> float:
        """Squared L2 error between predictor and target outputs."""
        diff = self.predictor(state) - self.target(state)
        return float(np.sum(diff**2))

    def update(self, state: np.ndarray) -> float:
        """One Adam step on the predictor; returns the pre-update MSE."""
        out, cache = self.predictor.forward(state)
        loss, grad = mse_loss(out, self.target(state))
        self.optimizer.step(self.predictor.backward(cache, grad).params)
        return loss


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


class AdvisingStrategy(ABC):
    name: StrategyName

    @abstractmethod
    def observe(self, ctx: AdviceContext) -> AdviceDecision:
        """Decide whether to ask the teacher; never spends budget itself."""

    def on_teacher_advice(self, ctx: AdviceContext, action: int) -> float:
        """Called after the teacher answered; returns the intrinsic reward."""
        return 0.0

    def reuse(self, ctx: AdviceContext) -> tuple[int, float] | None:
        """Re-issued advice and its intrinsic reward, when no teacher query was made."""
        return None

    def on_step_end(self, step: int, agent: DqnAgent, budget_left: int) -> None:
        """Hook for periodic retraining after the agent's learning step."""

    def save(self, directory: Path) -> list[Path]:
        return []


class NoAdvice(AdvisingStrategy):
    name = StrategyName.NA

    def observe(self, ctx: AdviceContext) -> AdviceDecision:
        return AdviceDecision(advise=False)


class EarlyAdvising(AdvisingStrategy):
    name = StrategyName.EA

    def observe(self, ctx: AdviceContext) -> AdviceDecision:
        return AdviceDecision(advise=decide_ea(ctx.budget_left))


class RandomAdvising(AdvisingStrategy):
    name = StrategyName.RA

    def __init__(self, probability: float, rng: np.random.Generator) -> None:
        self.probability = probability
        self.rng = rng

    def observe(self, ctx: AdviceContext) -> AdviceDecision:
        return AdviceDecision(advise=decide_ra(self.rng, ctx.budget_left, self.probability))


class ImportanceAdvising(AdvisingStrategy):
    """Q-spread importance against a fixed or an adaptive percentile threshold."""

    name = StrategyName.IAA

    def __init__(self, threshold: float | None, queue: AdaptiveQueue) -> None:
        self.fixed_threshold = threshold
        self.queue = queue

    def observe(self, ctx: AdviceContext) -> AdviceDecision:
        score = importance(ctx.q_values)
        if self.fixed_threshold is not None:
            return AdviceDecision(
                advise=decide_iaa(ctx.q_values, self.fixed_threshold),
                score=score,
                threshold=self.fixed_threshold,
            )
        threshold = self.queue.threshold()
        self.queue.push(score)
        advise = True if threshold is None else should_advise(score, threshold)
        return AdviceDecision(advise=advise, score=score, threshold=threshold)


class NoveltyAdvising(AdvisingStrategy):
    """RND novelty; the predictor only learns on states the teacher advised on."""

    name = StrategyName.ANA

    def __init__(self, rnd: RndPair, queue: AdaptiveQueue) -> None:
        self.rnd = rnd
        self.queue = queue

    def observe(self, ctx: AdviceContext) -> AdviceDecision:
        if ctx.budget_left <= 0:
            return AdviceDecision(advise=False)
        score = self.rnd.novelty(ctx.state)
        threshold = self.queue.threshold()
        self.queue.push(score)
        advise = True if threshold is None else should_advise(score, threshold)
        return AdviceDecision(advise=advise, score=score, threshold=threshold)

    def on_teacher_advice(self, ctx: AdviceContext, action: int) -> float:
        self.rnd.update(ctx.state)
        return 0.0

    def save(self, directory: Path) -> list[Path]:
        nets = {"rnd_target": self.rnd.target, "rnd_predictor": self.rnd.predictor}
        return [save_networks(directory / "rnd", nets, {"kind": "rnd"})]


class ContrastiveAdvising(AdvisingStrategy):
    """Contrastive selector, reuse model and intrinsic reward.

    ``use_selector=False`` replaces selection with early advising and
    fixes the distance ratio at 1; ``use_generator=False`` drops the
    reuse model and the intrinsic reward.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        input_size: int,
        n_actions: int,
        rng: np.random.Generator,
        *,
        use_selector: bool = True,
        use_generator: bool = True,
    ) -> None:
        seeds = rng.integers(0, 2**31, size=2)
        self.rng = rng
        self.use_selector = use_selector
        self.use_generator = use_generator
        self.selector_section = config.selector
        self.reuse_section = config.reuse
        self.name = {
            (True, True): StrategyName.A7,
            (False, True): StrategyName.A7_NO_SELECTOR,
            (True, False): StrategyName.A7_NO_GENERATOR,
        }[(use_selector, use_generator)]

        self.selector: AdviceSelector | None = None
        if use_selector:
            byol = ActionByol(input_size, n_actions, config.selector, int(seeds[0]))
            self.selector = AdviceSelector(byol, config.selector)
        self.reuse_model: ReuseModel | None = None
        if use_generator:
            self.reuse_model = ReuseModel(input_size, n_actions, config.reuse, int(seeds[1]))
        self.lam = LambdaSchedule(config.reuse.lambda_initial, config.reuse.lambda_horizon)
        self._distance: float | None = None
        self._reuse_due = False

    def _bonus(self, lam: float) -> float:
        if not self.use_generator:
            return 0.0
        if self.selector is None or self._distance is None:
            return lam * math.tanh(1.0)
        return intrinsic_reward(self._distance, self.selector.mean_distance, lam)

    def observe(self, ctx: AdviceContext) -> AdviceDecision:
        if self.selector is None:
            self._distance = None
            return AdviceDecision(advise=decide_ea(ctx.budget_left))
        if ctx.budget_left <= 0:
            # Still scored so reused advice gets a distance-scaled reward
            self._distance = self.selector.distance_only(ctx.state)
            return AdviceDecision(advise=False, score=self._distance)
        decision = self.selector.observe(ctx.state)
        self._distance = decision.score
        return decision

    def on_teacher_advice(self, ctx: AdviceContext, action: int) -> float:
        if self.reuse_model is not None:
            self.reuse_model.add_pair(ctx.state, action)
            if len(self.reuse_model) % self.reuse_section.advice_milestone == 0:
                self._reuse_due = True
        return self._bonus(self.lam.initial)

    def reuse(self, ctx: AdviceContext) -> tuple[int, float] | None:
        if self.reuse_model is None:
            return None
        action = self.reuse_model.maybe_reuse(ctx.state, self.rng)
        if action is None:
            return None
        return action, self._bonus(self.lam(ctx.step))

    def on_step_end(self, step: int, agent: DqnAgent, budget_left: int) -> None:
        if (
            self.selector is not None
            and budget_left > 0
            and step % self.selector_section.retrain_interval == 0
            and len(agent.replay) > 0
        ):
            self.selector.retrain(agent.replay.transitions(), self.rng)
        if self._reuse_due and self.reuse_model is not None:
            epochs = (
                self.reuse_section.initial_epochs
                if self.reuse_model.rounds == 0
                else self.reuse_section.followup_epochs
            )
            self.reuse_model.train(epochs, self.rng)
            self._reuse_due = False

    def save(self, directory: Path) -> list[Path]:
        paths = []
        if self.selector is not None and self.selector.byol.rounds > 0:
            paths.append(save_networks(
                directory / "byol",
                self.selector.byol.networks(),
                {"kind": "action-byol", "rounds": self.selector.byol.rounds},
            ))
        if self.reuse_model is not None and self.reuse_model.trained:
            paths.append(self.reuse_model.save(directory / "reuse"))
        return paths


def make_strategy(
    config: ExperimentConfig,
    input_size: int,
    n_actions: int,
    rng: np.random.Generator,
) -> AdvisingStrategy:
    """Instantiate the configured strategy with its own random stream."""
    advising = config.advising
    match advising.strategy:
        case StrategyName.NA:
            return NoAdvice()
        case StrategyName.EA:
            return EarlyAdvising()
        case StrategyName.RA:
            return RandomAdvising(advising.random_probability, rng)
        case StrategyName.IAA:
            queue = AdaptiveQueue(advising.queue_length, advising.iaa_percentile)
            return ImportanceAdvising(advising.iaa_threshold, queue)
        case StrategyName.ANA:
            rnd = RndPair(
                input_size,
                advising.rnd_hidden,
                advising.rnd_output_dim,
                advising.rnd_learning_rate,
                int(rng.integers(0, 2**31)),
            )
            queue = AdaptiveQueue(advising.queue_length, advising.novelty_percentile)
            return NoveltyAdvising(rnd, queue)
        case StrategyName.A7_NO_SELECTOR:
            return ContrastiveAdvising(config, input_size, n_actions, rng, use_selector=False)
        case StrategyName.A7_NO_GENERATOR:
            return ContrastiveAdvising(config, input_size, n_actions, rng, use_generator=False)
        case _:
            return ContrastiveAdvising(config, input_size, n_actions, rng)
