"""Tests for agent.dqn and agent.replay."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from agent.dqn import (
    DqnAgent,
    DuelingQNet,
    EpsilonSchedule,
    epsilon_greedy,
    load_student,
    td_targets,
)
from agent.replay import Batch, ReplayBuffer, Transition
from core.config import AgentSection, EnvSection
from core.errors import CheckpointError, NotReadyError, ShapeError
from env.maps import make_env
from tests.gradcheck import max_relative_error


def _transition(action: int = 0, reward: float = 0.0, terminal: bool = False) -> Transition:
    return Transition(np.zeros(3), action, reward, np.ones(3), terminal)


def _tabular_net(values: list[float], advantages: list[list[float]]) -> DuelingQNet:
    """Two one-hot states: identity trunk, per-state value and advantage rows."""
    net = DuelingQNet(2, 2, [2])
    net.trunk.set_params([np.eye(2), np.zeros(2)])
    net.value.set_params([np.array(values)[:, None], np.zeros(1)])
    net.advantage.set_params([np.array(advantages), np.zeros(2)])
    return net


class TestDuelingQNet:
    def test_recombination_matches_heads(self) -> None:
        net = DuelingQNet(5, 4, [16, 8], rng_seed=3)
        states = np.random.default_rng(0).normal(size=(10, 5))
        v, a = net.head_outputs(states)
        expected = v + a - a.mean(axis=1, keepdims=True)
        np.testing.assert_allclose(net.q_values(states), expected, atol=1e-9)

    def test_advantages_are_mean_centred(self) -> None:
        net = DuelingQNet(5, 4, [16], rng_seed=1)
        states = np.random.default_rng(1).normal(size=(20, 5))
        v, _ = net.head_outputs(states)
        centred = net.q_values(states) - v
        np.testing.assert_allclose(centred.mean(axis=1), 0.0, atol=1e-9)

    def test_zero_weights_give_zero_q(self) -> None:
        net = DuelingQNet(3, 2, [4])
        for mlp in net.nets:
            mlp.set_params([np.zeros_like(p) for p in mlp.params])
        np.testing.assert_array_equal(net.q_values(np.ones(3)), np.zeros(2))

    def test_equal_advantages_give_value(self) -> None:
        net = DuelingQNet(3, 4, [4])
        net.value.set_params([np.zeros((4, 1)), np.array([2.5])])
        net.advantage.set_params([np.zeros((4, 4)), np.full(4, 7.0)])
        np.testing.assert_allclose(net.q_values(np.ones(3)), np.full(4, 2.5))

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ShapeError):
            DuelingQNet(3, 2, [4]).q_values(np.ones(4))

    def test_default_heads_start_near_zero(self) -> None:
        env = make_env(EnvSection())
        agent = DqnAgent(AgentSection(), env.observation_size, 4, rng_seed=0)
        states = np.stack([env.encode(c) for c in env.reachable_cells()])
        assert np.abs(agent.q_values(states)).max() < 0.1
        np.testing.assert_array_equal(agent.target.q_values(states), agent.q_values(states))


class TestActionSelection:
    def test_schedule(self) -> None:
        eps = EpsilonSchedule(1.0, 0.01, 5000)
        assert eps(0) == 1.0
        assert eps(2500) == pytest.approx(0.505)
        assert eps(5000) == pytest.approx(0.01)
        assert eps(50000) == pytest.approx(0.01)

    def test_greedy_and_tie_break(self) -> None:
        rng = np.random.default_rng(0)
        assert epsilon_greedy(np.array([0.0, 3.0, 1.0]), 0.0, rng) == 1
        assert epsilon_greedy(np.array([2.0, 2.0, 1.0]), 0.0, rng) == 0

    def test_uniform_when_epsilon_one(self) -> None:
        rng = np.random.default_rng(12345)
        draws = [epsilon_greedy(np.array([0.0, 9.0, 0.0, 0.0]), 1.0, rng) for _ in range(10000)]
        counts = np.bincount(draws, minlength=4)
        sigma = np.sqrt(10000 * 0.25 * 0.75)
        assert np.all(np.abs(counts - 2500) < 4 * sigma)

    def test_agent_acts_greedily_at_zero_epsilon(self) -> None:
        agent = DqnAgent(AgentSection(hidden_sizes=[8]), 3, 4, rng_seed=2)
        state = np.array([0.2, -0.4, 1.0])
        expected = int(np.argmax(agent.q_values(state)))
        assert agent.select_action(state, 0.0, np.random.default_rng(0)) == expected


class TestTdTargets:
    def test_double_dqn_against_tabular_oracle(self) -> None:
        online = _tabular_net([0.0, 0.0], [[1.0, 5.0], [3.0, 2.0]])
        target = _tabular_net([10.0, 20.0], [[0.0, 6.0], [4.0, 0.0]])
        # Online Q: s0 -> [-2, 2] (argmax 1), s1 -> [0.5, -0.5] (argmax 0)
        # Target Q: s0 -> [7, 13], s1 -> [22, 18]
        s0, s1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        batch = Batch.from_transitions([
            Transition(s1, 0, 0.5, s0, False),
            Transition(s0, 1, 0.0, s1, False),
            Transition(s0, 1, 1.0, s1, True),
        ])
        y = td_targets(batch, online, target, gamma=0.9)
        np.testing.assert_allclose(y, [0.5 + 0.9 * 13.0, 0.9 * 22.0, 1.0], rtol=1e-12)

    def test_gamma_zero_gives_rewards(self) -> None:
        net = DuelingQNet(3, 2, [4])
        batch = Batch.from_transitions([_transition(reward=r) for r in (0.0, 0.3, 1.0)])
        np.testing.assert_array_equal(td_targets(batch, net, net, 0.0), [0.0, 0.3, 1.0])


class TestTraining:
    @pytest.fixture
    def agent(self) -> DqnAgent:
        section = AgentSection(
            hidden_sizes=[8, 8], learning_rate=1e-3, replay_min_size=4, replay_max_size=50,
            batch_size=4, target_update_interval=100,
        )
        return DqnAgent(section, 3, 2, rng_seed=7)

    def test_td_gradient_matches_finite_differences(self, agent: DqnAgent) -> None:
        rng = np.random.default_rng(2)
        batch = Batch(
            states=rng.normal(size=(5, 3)),
            actions=rng.integers(0, 2, size=5),
            rewards=rng.normal(size=5),
            next_states=rng.normal(size=(5, 3)),
            terminals=np.array([False, True, False, False, True]),
        )
        targets = td_targets(batch, agent.online, agent.target, 0.99)
        _, grads = agent.loss_and_grads(batch, targets)
        params = [p for net in agent.online.nets for p in net.params]

        def loss() -> float:
            return agent.loss_and_grads(batch, targets)[0]

        assert max_relative_error(loss, params, grads) < 1e-4

    def test_loss_decreases_on_fixed_batch(self, agent: DqnAgent) -> None:
        batch = Batch.from_transitions([_transition(action=1, reward=1.0, terminal=True)])
        losses = [agent.train_batch(batch) for _ in range(100)]
        assert losses[-1] < losses[0]

    def test_zero_error_batch_has_zero_loss(self, agent: DqnAgent) -> None:
        state = np.zeros(3)
        q = agent.q_values(state)
        batch = Batch.from_transitions([Transition(state, 0, float(q[0]), state, True)])
        assert agent.train_batch(batch) == pytest.approx(0.0, abs=1e-20)

    def test_gradients_clipped_before_adam(self, monkeypatch: pytest.MonkeyPatch) -> None:
        section = AgentSection(hidden_sizes=[8], replay_min_size=4, batch_size=4, max_grad_norm=0.5)
        agent = DqnAgent(section, 3, 2, rng_seed=1)
        seen: list[float] = []
        step = agent.optimizer.step

        def spy(grads: list[np.ndarray]) -> None:
            seen.append(float(np.sqrt(sum(np.sum(g * g) for g in grads))))
            step(grads)

        monkeypatch.setattr(agent.optimizer, "step", spy)
        batch = Batch.from_transitions([_transition(action=1, reward=1000.0, terminal=True)])
        agent.train_batch(batch)
        assert seen[0] == pytest.approx(0.5)

    def test_target_untouched_until_sync(self, agent: DqnAgent) -> None:
        states = np.random.default_rng(3).normal(size=(6, 3))
        before = agent.target.q_values(states)
        batch = Batch.from_transitions([_transition(action=1, reward=1.0, terminal=True)])
        for _ in range(10):
            agent.train_batch(batch)
        np.testing.assert_array_equal(agent.target.q_values(states), before)

        agent.sync_target()
        np.testing.assert_array_equal(agent.target.q_values(states), agent.q_values(states))
        synced = agent.target.q_values(states)
        agent.train_batch(batch)
        np.testing.assert_array_equal(agent.target.q_values(states), synced)

    def test_periodic_sync(self, agent: DqnAgent) -> None:
        batch = Batch.from_transitions([_transition(action=1, reward=1.0, terminal=True)])
        for _ in range(100):
            agent.train_batch(batch)
        states = np.random.default_rng(4).normal(size=(3, 3))
        np.testing.assert_array_equal(agent.target.q_values(states), agent.q_values(states))

    def test_train_step_needs_min_size(self, agent: DqnAgent) -> None:
        rng = np.random.default_rng(0)
        with pytest.raises(NotReadyError):
            agent.train_step(rng)
        for _ in range(4):
            agent.remember(_transition())
        assert np.isfinite(agent.train_step(rng))

    def test_checkpoint_round_trip(self, agent: DqnAgent, tmp_path: Path) -> None:
        manifest = agent.save(tmp_path / "agent")
        net = load_student(manifest)
        states = np.random.default_rng(5).normal(size=(4, 3))
        np.testing.assert_array_equal(net.q_values(states), agent.q_values(states))

    def test_wrong_checkpoint_kind(self, tmp_path: Path) -> None:
        from nn.checkpoint import save_networks
        from nn.mlp import Mlp

        save_networks(tmp_path, {"x": Mlp([2, 2])}, {"kind": "other"})
        with pytest.raises(CheckpointError):
            load_student(tmp_path)


class TestReplayBuffer:
    def test_fifo_eviction(self) -> None:
        buf = ReplayBuffer(max_size=5, min_size=1)
        for a in range(8):
            buf.append(_transition(action=a))
        assert len(buf) == 5
        assert [t.action for t in buf.transitions()] == [3, 4, 5, 6, 7]

    def test_sample_without_replacement(self) -> None:
        buf = ReplayBuffer(max_size=10, min_size=10)
        for a in range(10):
            buf.append(_transition(action=a))
        batch = buf.sample(10, np.random.default_rng(0))
        assert sorted(batch.actions.tolist()) == list(range(10))

    def test_not_ready(self) -> None:
        buf = ReplayBuffer(max_size=10, min_size=3)
        buf.append(_transition())
        assert not buf.ready
        with pytest.raises(NotReadyError):
            buf.sample(1, np.random.default_rng(0))

    def test_non_finite_reward_rejected(self) -> None:
        with pytest.raises(ValueError):
            _transition(reward=float("nan"))
