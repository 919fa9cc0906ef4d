"""Uniform replay buffer of environment transitions."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from core.errors import NotReadyError


@dataclass(frozen=True)
class Transition:
    """One environment step as stored for learning.

    ``reward`` already includes any intrinsic bonus granted when the
    step was collected.
    """

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool
    advised: bool = False

    def __post_init__(self) -> None:
        if not math.isfinite(self.reward):
            raise ValueError(f"transition reward must be finite, got {self.reward}")
        if self.action < 0:
            raise ValueError(f"transition action must be non-negative, got {self.action}")


@dataclass
class Batch:
    """Column-stacked transitions."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition]) -> Batch:
        if not transitions:
            raise ValueError("cannot build an empty batch")
        return cls(
            states=np.stack([t.state for t in transitions]),
            actions=np.array([t.action for t in transitions], dtype=np.int64),
            rewards=np.array([t.reward for t in transitions], dtype=np.float64),
            next_states=np.stack([t.next_state for t in transitions]),
            terminals=np.array([t.terminal for t in transitions], dtype=bool),
        )

    def __len__(self) -> int:
        return int(self.actions.shape[0])


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions."""

    def __init__(self, max_size: int, min_size: int) -> None:
        if min_size > max_size:
            raise ValueError(f"min_size {min_size} exceeds max_size {max_size}")
        self.max_size = max_size
        self.min_size = min_size
        self._items: list[Transition] = []
        self._next = 0  # slot overwritten by the next append once full

    def __len__(self) -> int:
        return len(self._items)

    @property
    def ready(self) -> bool:
        return len(self._items) >= self.min_size

    def append(self, transition: Transition) -> None:
        if len(self._items) < self.max_size:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.max_size

    def transitions(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        if len(self._items) < self.max_size:
            return list(self._items)
        return self._items[self._next:] + self._items[:self._next]

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if not self.ready:
            raise NotReadyError(
                f"replay buffer holds {len(self._items)} transitions, needs {self.min_size}"
            )
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return Batch.from_transitions([self._items[i] for i in idx])
