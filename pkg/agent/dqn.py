"""The student: dueling double-DQN with epsilon-greedy exploration.

Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a'), trained on the mean squared
TD error against double-DQN targets (online argmax, target evaluation).
Both heads start near zero (``head_init_scale``) and gradients are clipped
to ``max_grad_norm`` before each Adam step.
The target network is a hard copy refreshed every
``target_update_interval`` optimizer steps.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from agent.replay import Batch, ReplayBuffer, Transition
from core.config import AgentSection
from core.errors import CheckpointError, ShapeError
from nn.checkpoint import load_networks, save_networks
from nn.mlp import ForwardCache, Mlp
from nn.optim import Adam, clip_grad_norm

log = logging.getLogger("a7.agent")


class EpsilonSchedule:
    """Linear anneal from ``start`` to ``end`` over ``anneal_steps``, then constant."""

    def __init__(self, start: float, end: float, anneal_steps: int) -> None:
        self.start = start
        self.end = end
        self.anneal_steps = anneal_steps

    def __call__(self, step: int) -> float:
        frac = min(1.0, max(0, step) / self.anneal_steps)
        return self.start + (self.end - self.start) * frac


def epsilon_greedy(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform action with probability epsilon, else argmax (lowest index on ties)."""
    # Always draw the coin so the random stream does not depend on epsilon
    if rng.random() < epsilon:
        return int(rng.integers(q_values.shape[-1]))
    return int(np.argmax(q_values))


@dataclass
class DuelingCache:
    trunk: ForwardCache
    value: ForwardCache
    advantage: ForwardCache
    batched: bool


class DuelingQNet:
    """Shared ReLU trunk feeding a scalar value head and an advantage head."""

    def __init__(
        self,
        input_size: int,
        n_actions: int,
        hidden_sizes: Sequence[int],
        rng_seed: int = 0,
        *,
        head_scale: float = 1.0,
    ) -> None:
        seeds = np.random.SeedSequence(rng_seed).generate_state(3)
        self.input_size = input_size
        self.n_actions = n_actions
        self.hidden_sizes = list(hidden_sizes)
        self.trunk = Mlp(
            [input_size, *self.hidden_sizes], activate_output=True, rng_seed=int(seeds[0]),
        )
        width = self.hidden_sizes[-1]
        self.value = Mlp([width, 1], output_scale=head_scale, rng_seed=int(seeds[1]))
        self.advantage = Mlp(
            [width, n_actions], output_scale=head_scale, rng_seed=int(seeds[2]),
        )

    @property
    def nets(self) -> list[Mlp]:
        return [self.trunk, self.value, self.advantage]

    def head_outputs(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Raw (V, A) before the dueling combination."""
        h = self.trunk(states)
        return self.value(h), self.advantage(h)

    def forward(self, states: np.ndarray) -> tuple[np.ndarray, DuelingCache]:
        states = np.asarray(states, dtype=np.float64)
        if states.shape[-1] != self.input_size:
            raise ShapeError(f"state shape {states.shape} does not match {self.input_size}")
        batched = states.ndim == 2
        x = states if batched else states[None, :]
        h, trunk_cache = self.trunk.forward(x)
        v, value_cache = self.value.forward(h)
        a, adv_cache = self.advantage.forward(h)
        q = v + a - a.mean(axis=1, keepdims=True)
        cache = DuelingCache(trunk_cache, value_cache, adv_cache, batched)
        return (q if batched else q[0]), cache

    def q_values(self, states: np.ndarray) -> np.ndarray:
        return self.forward(states)[0]

    def backward(self, cache: DuelingCache, grad_q: np.ndarray) -> list[np.ndarray]:
        """Gradients for trunk, value and advantage parameters, in that order."""
        g = grad_q if cache.batched else grad_q[None, :]
        grad_v = g.sum(axis=1, keepdims=True)
        grad_a = g - g.mean(axis=1, keepdims=True)
        value_grads = self.value.backward(cache.value, grad_v)
        adv_grads = self.advantage.backward(cache.advantage, grad_a)
        trunk_grads = self.trunk.backward(cache.trunk, value_grads.input + adv_grads.input)
        return trunk_grads.params + value_grads.params + adv_grads.params

    def copy_from(self, other: DuelingQNet) -> None:
        for dst, src in zip(self.nets, other.nets):
            dst.copy_from(src)

    def networks(self, prefix: str) -> dict[str, Mlp]:
        return {
            f"{prefix}_trunk": self.trunk,
            f"{prefix}_value": self.value,
            f"{prefix}_advantage": self.advantage,
        }

    @classmethod
    def from_networks(cls, nets: dict[str, Mlp], prefix: str) -> DuelingQNet:
        try:
            trunk = nets[f"{prefix}_trunk"]
            value = nets[f"{prefix}_value"]
            advantage = nets[f"{prefix}_advantage"]
        except KeyError as e:
            raise CheckpointError(f"checkpoint is missing network {e}") from None
        net = cls(trunk.input_size, advantage.output_size, trunk.layer_sizes[1:])
        net.copy_from_nets(trunk, value, advantage)
        return net

    def copy_from_nets(self, trunk: Mlp, value: Mlp, advantage: Mlp) -> None:
        self.trunk.copy_from(trunk)
        self.value.copy_from(value)
        self.advantage.copy_from(advantage)


def td_targets(
    batch: Batch, online: DuelingQNet, target: DuelingQNet, gamma: float,
) -> np.ndarray:
    """Double-DQN targets; terminal transitions do not bootstrap."""
    next_actions = np.argmax(online.q_values(batch.next_states), axis=1)
    rows = np.arange(len(batch))
    next_q = target.q_values(batch.next_states)[rows, next_actions]
    return batch.rewards + gamma * np.where(batch.terminals, 0.0, next_q)


class DqnAgent:
    """Online/target dueling networks, optimizer and replay memory."""

    def __init__(
        self, section: AgentSection, input_size: int, n_actions: int, rng_seed: int = 0,
    ) -> None:
        self.section = section
        self.n_actions = n_actions
        self.online = DuelingQNet(
            input_size, n_actions, section.hidden_sizes, rng_seed,
            head_scale=section.head_init_scale,
        )
        self.target = DuelingQNet(input_size, n_actions, section.hidden_sizes, rng_seed)
        self.target.copy_from(self.online)
        self.optimizer = Adam(self.online.nets, section.learning_rate)
        self.replay = ReplayBuffer(section.replay_max_size, section.replay_min_size)
        self.epsilon = EpsilonSchedule(
            section.epsilon_start, section.epsilon_end, section.epsilon_anneal_steps,
        )
        self.train_steps = 0

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self.online.q_values(state)

    def select_action(self, state: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
        return epsilon_greedy(self.q_values(state), epsilon, rng)

    def remember(self, transition: Transition) -> None:
        self.replay.append(transition)

    def loss_and_grads(
        self, batch: Batch, targets: np.ndarray,
    ) -> tuple[float, list[np.ndarray]]:
        """Mean squared TD error against fixed targets and its parameter gradients."""
        q, cache = self.online.forward(batch.states)
        rows = np.arange(len(batch))
        errors = q[rows, batch.actions] - targets
        grad_q = np.zeros_like(q)
        grad_q[rows, batch.actions] = 2.0 * errors / len(batch)
        return float(np.mean(errors**2)), self.online.backward(cache, grad_q)

    def train_batch(self, batch: Batch) -> float:
        """One Adam step on the online network; returns the pre-update loss."""
        targets = td_targets(batch, self.online, self.target, self.section.gamma)
        loss, grads = self.loss_and_grads(batch, targets)
        if self.section.max_grad_norm is not None:
            grads, _ = clip_grad_norm(grads, self.section.max_grad_norm)
        self.optimizer.step(grads)
        self.train_steps += 1
        if self.train_steps % self.section.target_update_interval == 0:
            self.sync_target()
        return loss

    def train_step(self, rng: np.random.Generator) -> float:
        """Sample a minibatch from replay and train on it (NotReadyError if too small)."""
        batch = self.replay.sample(self.section.batch_size, rng)
        return self.train_batch(batch)

    def sync_target(self) -> None:
        self.target.copy_from(self.online)
        log.debug("target network synced", extra={"step": self.train_steps})

    def save(self, directory: Path, meta: dict[str, Any] | None = None) -> Path:
        nets = {**self.online.networks("online"), **self.target.networks("target")}
        info = {"kind": "dueling-dqn", "train_steps": self.train_steps, **(meta or {})}
        return save_networks(directory, nets, info)


def load_student(manifest: Path) -> DuelingQNet:
    """Online network of a saved agent, for evaluation."""
    nets, meta = load_networks(manifest)
    if meta.get("kind") != "dueling-dqn":
        raise CheckpointError(f"{manifest}: not a dueling-dqn agent checkpoint")
    return DuelingQNet.from_networks(nets, "online")
