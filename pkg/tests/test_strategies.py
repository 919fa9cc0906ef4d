"""Tests for advising.strategies."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from advising.strategies import (
    AdviceContext,
    ContrastiveAdvising,
    EarlyAdvising,
    ImportanceAdvising,
    NoAdvice,
    NoveltyAdvising,
    RandomAdvising,
    RndPair,
    decide_ea,
    decide_iaa,
    decide_ra,
    importance,
    make_strategy,
)
from advising.reuse import intrinsic_reward
from advising.threshold import AdaptiveQueue
from agent.dqn import DqnAgent
from agent.replay import Transition
from core.config import ExperimentConfig, StrategyName, build_config
from core.errors import EmptyDatasetError
from env.maps import open_grid


def _ctx(step: int = 1, budget: int = 10, q: list[float] | None = None) -> AdviceContext:
    state = open_grid(5, 5).reset()
    return AdviceContext(step, state, np.array(q or [0.0, 0.0, 0.0, 0.0]), budget)


def _small_config(**advising: object) -> ExperimentConfig:
    return build_config({
        "agent": {"hidden_sizes": [8], "replay_min_size": 4, "batch_size": 4},
        "advising": advising,
        "selector": {
            "retrain_interval": 10, "epochs": 1, "queue_length": 3, "encoder_hidden": 8,
            "feature_dim": 4, "projector_hidden": 4, "projection_dim": 4, "predictor_hidden": 4,
        },
        "reuse": {
            "hidden_sizes": [8], "mc_passes": 5, "advice_milestone": 3,
            "initial_epochs": 2, "followup_epochs": 1, "lambda_horizon": 100,
        },
    })


class TestDecisionRules:
    def test_early_advising(self) -> None:
        assert decide_ea(1)
        assert not decide_ea(0)

    def test_random_advising_rate(self) -> None:
        rng = np.random.default_rng(7)
        hits = sum(decide_ra(rng, 10, 0.5) for _ in range(10000))
        assert abs(hits - 5000) < 4 * math.sqrt(10000 * 0.25)

    def test_random_advising_consumes_draw_without_budget(self) -> None:
        a, b = np.random.default_rng(3), np.random.default_rng(3)
        assert not decide_ra(a, 0)
        decide_ra(b, 10)
        assert a.random() == b.random()

    def test_importance(self) -> None:
        assert importance(np.array([1.0, 4.0, -2.0])) == 6.0
        assert decide_iaa(np.array([0.0, 1.0]), 0.5)
        assert not decide_iaa(np.array([0.0, 0.5]), 0.5)
        with pytest.raises(EmptyDatasetError):
            importance(np.array([]))


class TestRnd:
    def test_novelty_drops_on_trained_state(self) -> None:
        rnd = RndPair(11, 16, 4, 1e-2, rng_seed=1)
        seen = open_grid(5, 5).encode((0, 0))
        before = rnd.novelty(seen)
        losses = [rnd.update(seen) for _ in range(200)]
        assert rnd.novelty(seen) < before
        assert losses[-1] < losses[0]

    def test_target_is_frozen(self) -> None:
        rnd = RndPair(3, 8, 2, 1e-2)
        params = [p.copy() for p in rnd.target.params]
        rnd.update(np.ones(3))
        for a, b in zip(rnd.target.params, params):
            np.testing.assert_array_equal(a, b)


class TestBaselineStrategies:
    def test_no_advice(self) -> None:
        assert not NoAdvice().observe(_ctx()).advise

    def test_early_advising_until_budget_gone(self) -> None:
        strategy = EarlyAdvising()
        assert strategy.observe(_ctx(budget=1)).advise
        assert not strategy.observe(_ctx(budget=0)).advise

    def test_random_advising_probability_one(self) -> None:
        strategy = RandomAdvising(1.0, np.random.default_rng(0))
        assert strategy.observe(_ctx()).advise

    def test_importance_fixed_threshold(self) -> None:
        strategy = ImportanceAdvising(1.0, AdaptiveQueue(3, 0.5))
        assert strategy.observe(_ctx(q=[0.0, 2.0, 0.0, 0.0])).advise
        assert not strategy.observe(_ctx(q=[0.0, 1.0, 0.0, 0.0])).advise

    def test_importance_adaptive_queue(self) -> None:
        strategy = ImportanceAdvising(None, AdaptiveQueue(3, 0.5))
        spreads = [1.0, 2.0, 3.0]
        for s in spreads:
            assert strategy.observe(_ctx(q=[0.0, s, 0.0, 0.0])).advise
        # Median of (1, 2, 3) is 2
        assert strategy.observe(_ctx(q=[0.0, 2.5, 0.0, 0.0])).advise
        decision = strategy.observe(_ctx(q=[0.0, 2.0, 0.0, 0.0]))
        assert decision.threshold == 2.5
        assert not decision.advise

    def test_novelty_stops_after_budget(self) -> None:
        strategy = NoveltyAdvising(RndPair(11, 8, 4, 1e-3), AdaptiveQueue(3, 0.7))
        assert strategy.observe(_ctx()).advise
        decision = strategy.observe(_ctx(budget=0))
        assert not decision.advise
        assert len(strategy.queue) == 1

    def test_novelty_learns_only_from_advice(self) -> None:
        strategy = NoveltyAdvising(RndPair(11, 8, 4, 1e-2), AdaptiveQueue(3, 0.7))
        ctx = _ctx()
        before = strategy.rnd.novelty(ctx.state)
        strategy.observe(ctx)
        assert strategy.rnd.novelty(ctx.state) == before
        assert strategy.on_teacher_advice(ctx, 1) == 0.0
        assert strategy.rnd.novelty(ctx.state) != before

    def test_novelty_save(self, tmp_path: Path) -> None:
        strategy = NoveltyAdvising(RndPair(11, 8, 4, 1e-3), AdaptiveQueue(3, 0.7))
        (manifest,) = strategy.save(tmp_path)
        assert manifest.exists()


class TestMakeStrategy:
    @pytest.mark.parametrize(
        ("name", "cls"),
        [
            (StrategyName.NA, NoAdvice),
            (StrategyName.EA, EarlyAdvising),
            (StrategyName.RA, RandomAdvising),
            (StrategyName.IAA, ImportanceAdvising),
            (StrategyName.ANA, NoveltyAdvising),
            (StrategyName.A7, ContrastiveAdvising),
            (StrategyName.A7_NO_SELECTOR, ContrastiveAdvising),
            (StrategyName.A7_NO_GENERATOR, ContrastiveAdvising),
        ],
    )
    def test_each_name(self, name: StrategyName, cls: type) -> None:
        strategy = make_strategy(_small_config(strategy=name), 11, 4, np.random.default_rng(0))
        assert isinstance(strategy, cls)
        assert strategy.name == name

    def test_ablation_flags(self) -> None:
        rng = np.random.default_rng(0)
        no_sel = make_strategy(_small_config(strategy=StrategyName.A7_NO_SELECTOR), 11, 4, rng)
        no_gen = make_strategy(_small_config(strategy=StrategyName.A7_NO_GENERATOR), 11, 4, rng)
        assert isinstance(no_sel, ContrastiveAdvising)
        assert isinstance(no_gen, ContrastiveAdvising)
        assert no_sel.selector is None and no_sel.reuse_model is not None
        assert no_gen.selector is not None and no_gen.reuse_model is None


class TestContrastiveAdvising:
    @pytest.fixture
    def config(self) -> ExperimentConfig:
        return _small_config(strategy=StrategyName.A7)

    @pytest.fixture
    def agent(self, config: ExperimentConfig) -> DqnAgent:
        agent = DqnAgent(config.agent, 11, 4, rng_seed=0)
        env = open_grid(5, 5)
        rng = np.random.default_rng(0)
        state = env.reset()
        for _ in range(20):
            action = int(rng.integers(4))
            nxt, reward, done = env.step(action)
            agent.remember(Transition(state, action, reward, nxt, done))
            state = env.reset() if done else nxt
        return agent

    def test_cold_start_advises_with_flat_bonus(self, config: ExperimentConfig) -> None:
        strategy = ContrastiveAdvising(config, 11, 4, np.random.default_rng(0))
        ctx = _ctx()
        assert strategy.observe(ctx).advise
        bonus = strategy.on_teacher_advice(ctx, 1)
        assert bonus == pytest.approx(config.reuse.lambda_initial * math.tanh(1.0))

    def test_teacher_bonus_scales_with_distance_past_horizon(
        self, config: ExperimentConfig, agent: DqnAgent,
    ) -> None:
        strategy = ContrastiveAdvising(config, 11, 4, np.random.default_rng(0))
        strategy.on_step_end(10, agent, budget_left=5)
        assert strategy.selector is not None and strategy.selector.ready
        lam0 = config.reuse.lambda_initial
        # lambda_horizon is 100; teacher advice keeps lambda0 either side of it
        for step in (20, 500):
            ctx = _ctx(step=step)
            decision = strategy.observe(ctx)
            assert decision.score is not None
            bonus = strategy.on_teacher_advice(ctx, 1)
            expected = intrinsic_reward(decision.score, strategy.selector.mean_distance, lam0)
            assert bonus == pytest.approx(expected)
            assert 0.0 <= bonus <= lam0

    def test_retrains_selector_on_interval(
        self, config: ExperimentConfig, agent: DqnAgent,
    ) -> None:
        strategy = ContrastiveAdvising(config, 11, 4, np.random.default_rng(0))
        assert strategy.selector is not None
        strategy.on_step_end(9, agent, budget_left=5)
        assert strategy.selector.byol.rounds == 0
        strategy.on_step_end(10, agent, budget_left=5)
        assert strategy.selector.byol.rounds == 1
        assert strategy.selector.ready
        strategy.on_step_end(20, agent, budget_left=0)
        assert strategy.selector.byol.rounds == 1

    def test_reuse_model_trains_at_milestone(
        self, config: ExperimentConfig, agent: DqnAgent,
    ) -> None:
        strategy = ContrastiveAdvising(config, 11, 4, np.random.default_rng(0))
        assert strategy.reuse_model is not None
        for i, t in enumerate(agent.replay.transitions()[:3]):
            ctx = AdviceContext(i + 1, t.state, np.zeros(4), 10)
            strategy.on_teacher_advice(ctx, t.action)
            strategy.on_step_end(i + 1, agent, budget_left=10)
        assert strategy.reuse_model.rounds == 1
        assert strategy.reuse_model.trained

    def test_reuse_bonus_decays(self, config: ExperimentConfig) -> None:
        strategy = ContrastiveAdvising(config, 11, 4, np.random.default_rng(0))
        assert strategy.reuse_model is not None
        ctx = _ctx(step=50)
        strategy.reuse_model.add_pair(ctx.state, 2)
        strategy.reuse_model.train(1, np.random.default_rng(0))
        strategy.reuse_model.threshold = math.inf
        strategy.reuse_model.section = config.reuse.model_copy(update={"reuse_probability": 1.0})
        result = strategy.reuse(ctx)
        assert result is not None
        action, bonus = result
        assert action == strategy.reuse_model.predict_action(ctx.state)
        assert bonus == pytest.approx(0.5 * config.reuse.lambda_initial * math.tanh(1.0))
        assert strategy.reuse(_ctx(step=100)) == (action, 0.0)

    def test_without_generator_no_reward_or_reuse(self) -> None:
        config = _small_config(strategy=StrategyName.A7_NO_GENERATOR)
        strategy = ContrastiveAdvising(
            config, 11, 4, np.random.default_rng(0), use_generator=False,
        )
        ctx = _ctx()
        assert strategy.on_teacher_advice(ctx, 0) == 0.0
        assert strategy.reuse(ctx) is None

    def test_without_selector_advises_early(self) -> None:
        config = _small_config(strategy=StrategyName.A7_NO_SELECTOR)
        strategy = ContrastiveAdvising(
            config, 11, 4, np.random.default_rng(0), use_selector=False,
        )
        assert strategy.observe(_ctx(budget=1)).advise
        assert not strategy.observe(_ctx(budget=0)).advise

    def test_save_only_trained_parts(
        self, config: ExperimentConfig, agent: DqnAgent, tmp_path: Path,
    ) -> None:
        strategy = ContrastiveAdvising(config, 11, 4, np.random.default_rng(0))
        assert strategy.save(tmp_path) == []
        strategy.on_step_end(10, agent, budget_left=5)
        paths = strategy.save(tmp_path)
        assert [p.parent.name for p in paths] == ["byol"]
