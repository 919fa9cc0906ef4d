"""Action-conditioned BYOL.

The online branch encodes s_t, projects it, and predicts the target
branch's projection of s_{t+1} from that projection concatenated with
the one-hot action. The target branch (encoder + projector, no
predictor) is an exponential moving average of the online one and
receives no gradient. Only the forward direction s_t -> s_{t+1} is
trained.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from core.config import SelectorSection
from core.errors import EmptyDatasetError, ShapeError
from nn.losses import byol_regression_loss, normalize_rows
from nn.mlp import Mlp
from nn.optim import Adam

log = logging.getLogger("a7.byol")


@dataclass
class TrainingReport:
    """Mean minibatch loss of every epoch of one training round."""

    epoch_losses: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else float("nan")


class ActionByol:
    def __init__(
        self,
        input_size: int,
        n_actions: int,
        section: SelectorSection,
        rng_seed: int = 0,
    ) -> None:
        seeds = np.random.SeedSequence(rng_seed).generate_state(3)
        self.input_size = input_size
        self.n_actions = n_actions
        self.section = section
        self.tau = section.target_decay

        self.encoder = Mlp(
            [input_size, section.encoder_hidden, section.feature_dim], rng_seed=int(seeds[0]),
        )
        self.projector = Mlp(
            [section.feature_dim, section.projector_hidden, section.projection_dim],
            rng_seed=int(seeds[1]),
        )
        self.predictor = Mlp(
            [section.projection_dim + n_actions, section.predictor_hidden, section.projection_dim],
            rng_seed=int(seeds[2]),
        )
        self.target_encoder = self.encoder.clone()
        self.target_projector = self.projector.clone()
        self.optimizer = Adam(self.online_nets, section.learning_rate)
        self.rounds = 0

    @property
    def online_nets(self) -> list[Mlp]:
        return [self.encoder, self.projector, self.predictor]

    @property
    def target_nets(self) -> list[Mlp]:
        return [self.target_encoder, self.target_projector]

    def one_hot(self, actions: np.ndarray) -> np.ndarray:
        actions = np.asarray(actions, dtype=np.int64)
        if np.any(actions < 0) or np.any(actions >= self.n_actions):
            raise IndexError("action outside the action space")
        return np.eye(self.n_actions)[actions]

    def loss_and_grads(
        self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray,
    ) -> tuple[float, list[np.ndarray]]:
        """Regression loss 2 - 2cos(prediction, target projection) and online gradients.

        Gradients are ordered encoder, projector, predictor, matching
        ``online_nets``.
        """
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        next_states = np.atleast_2d(np.asarray(next_states, dtype=np.float64))
        actions = np.atleast_1d(np.asarray(actions, dtype=np.int64))
        if not states.shape[0] == next_states.shape[0] == actions.shape[0]:
            raise ShapeError("states, actions and next_states differ in batch size")

        y, enc_cache = self.encoder.forward(states)
        z, proj_cache = self.projector.forward(y)
        p, pred_cache = self.predictor.forward(np.hstack([z, self.one_hot(actions)]))
        target = self.target_projector(self.target_encoder(next_states))

        loss, grad_p = byol_regression_loss(p, target)
        pred_grads = self.predictor.backward(pred_cache, grad_p)
        grad_z = pred_grads.input[:, : z.shape[1]]
        proj_grads = self.projector.backward(proj_cache, grad_z)
        enc_grads = self.encoder.backward(enc_cache, proj_grads.input)
        return loss, enc_grads.params + proj_grads.params + pred_grads.params

    def byol_loss(self, state: np.ndarray, action: int, next_state: np.ndarray) -> float:
        return self.loss_and_grads(state, np.array([action]), next_state)[0]

    def ema_update(self) -> None:
        """xi <- tau * xi + (1 - tau) * theta for the target encoder and projector."""
        for target, online in zip(self.target_nets, self.online_nets[:2]):
            for t, o in zip(target.params, online.params):
                t *= self.tau
                t += (1.0 - self.tau) * o
            target.touch()

    def train(
        self,
        states: np.ndarray,
        actions: np.ndarray,
        next_states: np.ndarray,
        rng: np.random.Generator,
        epochs: int | None = None,
        batch_size: int | None = None,
    ) -> TrainingReport:
        """Shuffled minibatch training, one EMA update per optimizer step."""
        n = len(actions)
        if n == 0:
            raise EmptyDatasetError("action-BYOL needs at least one transition")
        epochs = self.section.epochs if epochs is None else epochs
        batch_size = self.section.batch_size if batch_size is None else batch_size

        report = TrainingReport()
        for epoch in range(epochs):
            order = rng.permutation(n)
            losses = []
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                loss, grads = self.loss_and_grads(states[idx], actions[idx], next_states[idx])
                self.optimizer.step(grads)
                self.ema_update()
                losses.append(loss)
            report.epoch_losses.append(float(np.mean(losses)))
            log.debug("byol epoch", extra={"epoch": epoch, "loss": report.epoch_losses[-1]})
        self.rounds += 1
        return report

    def extract_features(self, states: np.ndarray) -> np.ndarray:
        """L2-normalized online encoder outputs, one row per state."""
        return normalize_rows(self.encoder(np.atleast_2d(states)))

    def extract_feature(self, state: np.ndarray) -> np.ndarray:
        return self.extract_features(state)[0]

    def networks(self) -> dict[str, Mlp]:
        return {
            "encoder": self.encoder,
            "projector": self.projector,
            "predictor": self.predictor,
            "target_encoder": self.target_encoder,
            "target_projector": self.target_projector,
        }
