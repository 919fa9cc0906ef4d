"""Behaviour-cloned reuse model, MC-dropout gating and the intrinsic reward.

Teacher advice is stored as (state, action) pairs and cloned by a
dropout network. The model re-issues advice for a state only when its
uncertainty is below the 90th percentile of its uncertainty on the
pairs it was trained on. Uncertainty is the variance of the outputs
over K dropout masks, averaged over actions. The K masks are drawn once
per training round and shared by the threshold and every later query,
so within a round a state's uncertainty is a fixed number.
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path

import numpy as np

from advising.threshold import percentile_value
from core.config import ReuseSection, UncertaintySource
from core.errors import CheckpointError, DegenerateVectorError, EmptyDatasetError, ShapeError
from nn.checkpoint import save_networks
from nn.losses import nll_loss_batch, softmax
from nn.mlp import Mlp
from nn.optim import Adam

log = logging.getLogger("a7.reuse")

PAIRS_FILE = "pairs.csv"

# Stacked rows per MC-dropout forward; bounds memory for large pair sets
_MC_CHUNK_ROWS = 20000


class LambdaSchedule:
    """lambda_t = lambda0 * max(0, 1 - t / horizon)."""

    def __init__(self, initial: float, horizon: int) -> None:
        if horizon <= 0:
            raise ValueError(f"lambda horizon must be positive, got {horizon}")
        self.initial = initial
        self.horizon = horizon

    def __call__(self, step: int) -> float:
        return self.initial * max(0.0, 1.0 - step / self.horizon)


def intrinsic_reward(distance: float, normalizer: float, lam: float) -> float:
    """lam * tanh(distance / normalizer)."""
    if normalizer <= 0.0:
        raise DegenerateVectorError(f"distance normalizer must be positive, got {normalizer}")
    return lam * math.tanh(distance / normalizer)


def mc_dropout_uncertainty(
    net: Mlp,
    states: np.ndarray,
    passes: int,
    source: UncertaintySource = UncertaintySource.LOGITS,
    masks: list[np.ndarray] | None = None,
) -> np.ndarray:
    """Per-state mean over actions of the output variance across ``passes`` dropout masks.

    ``masks`` (one (passes, width) array per hidden layer) fixes the masks;
    otherwise fresh ones are drawn from the network's stream.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if net.dropout_rate == 0.0:
        # Every pass is identical
        return np.zeros(states.shape[0])
    if masks is not None and any(m.shape[0] != passes for m in masks):
        raise ShapeError(f"fixed masks must have {passes} rows")
    per_chunk = max(1, _MC_CHUNK_ROWS // passes)
    result = np.empty(states.shape[0])
    for start in range(0, states.shape[0], per_chunk):
        chunk = states[start:start + per_chunk]
        stacked = np.repeat(chunk, passes, axis=0)
        if masks is None:
            out, _ = net.forward(stacked, training=True)
        else:
            tiled = [np.tile(m, (chunk.shape[0], 1)) for m in masks]
            out, _ = net.forward(stacked, masks=tiled)
        if source is UncertaintySource.PROBABILITIES:
            out = softmax(out)
        out = out.reshape(chunk.shape[0], passes, -1)
        result[start:start + chunk.shape[0]] = out.var(axis=1).mean(axis=1)
    return result


class ReuseModel:
    def __init__(
        self, input_size: int, n_actions: int, section: ReuseSection, rng_seed: int = 0,
    ) -> None:
        self.section = section
        self.n_actions = n_actions
        self.net = Mlp(
            [input_size, *section.hidden_sizes, n_actions],
            dropout_rate=section.dropout_rate,
            rng_seed=rng_seed,
        )
        self.optimizer = Adam([self.net], section.learning_rate)
        self._states: list[np.ndarray] = []
        self._actions: list[int] = []
        self.threshold: float | None = None
        self.masks: list[np.ndarray] | None = None
        self.rounds = 0

    def __len__(self) -> int:
        return len(self._actions)

    @property
    def trained(self) -> bool:
        return self.threshold is not None

    def add_pair(self, state: np.ndarray, action: int) -> None:
        self._states.append(np.asarray(state, dtype=np.float64))
        self._actions.append(int(action))

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._actions:
            raise EmptyDatasetError("reuse model has no state-advice pairs")
        return np.stack(self._states), np.array(self._actions, dtype=np.int64)

    def nll_and_grads(
        self, states: np.ndarray, actions: np.ndarray,
    ) -> tuple[float, list[np.ndarray]]:
        """Mean negative log-likelihood with dropout active, and its gradients."""
        logits, cache = self.net.forward(states, training=True)
        loss, grad = nll_loss_batch(logits, actions)
        return loss, self.net.backward(cache, grad).params

    def train(self, epochs: int, rng: np.random.Generator) -> float:
        """Minibatch Adam over all pairs; returns the final epoch's mean NLL.

        Refreshes the reuse threshold afterwards.
        """
        states, actions = self.pairs()
        n = len(actions)
        batch = self.section.batch_size
        epoch_loss = float("nan")
        for _ in range(epochs):
            order = rng.permutation(n)
            losses = []
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                loss, grads = self.nll_and_grads(states[idx], actions[idx])
                self.optimizer.step(grads)
                losses.append(loss)
            epoch_loss = float(np.mean(losses))
        if self.net.dropout_rate > 0.0:
            self.masks = self.net.sample_masks(self.section.mc_passes)
        self.threshold = self.reuse_threshold()
        self.rounds += 1
        log.info(
            "reuse round %d on %d pairs, threshold %.3g", self.rounds, n, self.threshold,
            extra={"loss": epoch_loss, "epoch": epochs},
        )
        return epoch_loss

    def uncertainty(self, states: np.ndarray) -> np.ndarray:
        """Per-state uncertainty, one state at a time under the round's masks."""
        rows = np.atleast_2d(np.asarray(states, dtype=np.float64))
        section = self.section
        return np.array([
            mc_dropout_uncertainty(
                self.net, row, section.mc_passes, section.uncertainty_source, self.masks,
            )[0]
            for row in rows
        ])

    def reuse_threshold(self) -> float:
        states, _ = self.pairs()
        return percentile_value(self.uncertainty(states), self.section.uncertainty_percentile)

    def predict_action(self, state: np.ndarray) -> int:
        """Argmax of the dropout-free output."""
        return int(np.argmax(self.net(state)))

    def maybe_reuse(self, state: np.ndarray, rng: np.random.Generator) -> int | None:
        """Re-issue advice for a confidently cloned state, or None."""
        if self.threshold is None:
            return None
        if rng.random() >= self.section.reuse_probability:
            return None
        u = float(self.uncertainty(state)[0])
        if u < self.threshold or (self.section.inclusive_threshold and u == self.threshold):
            return self.predict_action(state)
        return None

    def save(self, directory: Path) -> Path:
        manifest = save_networks(
            directory,
            {"reuse": self.net},
            {"kind": "reuse", "threshold": self.threshold, "rounds": self.rounds},
        )
        save_pairs(self._states, self._actions, directory / PAIRS_FILE)
        return manifest


def save_pairs(states: list[np.ndarray], actions: list[int], path: Path) -> None:
    """CSV with one row per pair: s0..s{n-1}, action."""
    width = len(states[0]) if states else 0
    try:
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow([*(f"s{i}" for i in range(width)), "action"])
            for state, action in zip(states, actions):
                writer.writerow([*(repr(float(v)) for v in state), action])
    except OSError as e:
        raise CheckpointError(f"cannot write pairs {path}: {e}") from e


def load_pairs(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with path.open(newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise CheckpointError(f"cannot read pairs {path}: {e}") from e
    if not rows or not rows[0] or rows[0][-1] != "action":
        raise CheckpointError(f"{path}: missing 's0,...,action' header")
    width = len(rows[0])
    body = rows[1:]
    if not body:
        raise EmptyDatasetError(f"{path}: no pairs")
    states: list[list[float]] = []
    actions: list[int] = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != width:
            raise CheckpointError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        try:
            states.append([float(v) for v in row[:-1]])
            actions.append(int(row[-1]))
        except ValueError as e:
            raise CheckpointError(f"{path}:{lineno}: {e}") from e
    return np.array(states, dtype=np.float64), np.array(actions, dtype=np.int64)
