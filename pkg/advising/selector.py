"""Contrastive advice selector.

Each state is encoded with the action-BYOL encoder and compared with a
single running-mean feature. Because features are unit vectors, the dot
product with the mean equals the mean cosine similarity to every stored
feature. The agent asks the teacher when the resulting distance exceeds
a percentile of recent distances.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from advising.byol import ActionByol, TrainingReport
from advising.threshold import AdaptiveQueue, should_advise
from agent.replay import Transition
from core.config import DistanceMode, SelectorSection
from core.errors import ColdStartError, EmptyDatasetError, ShapeError

log = logging.getLogger("a7.selector")


class FeatureBuffer:
    """Running mean of every feature folded in since the last rebuild."""

    def __init__(self, dim: int) -> None:
        self.dim = dim
        self.mean = np.zeros(dim)
        self.count = 0

    def fold(self, feature: np.ndarray) -> None:
        feature = np.asarray(feature, dtype=np.float64)
        if feature.shape != (self.dim,):
            raise ShapeError(f"feature shape {feature.shape} does not match ({self.dim},)")
        self.mean = (self.count * self.mean + feature) / (self.count + 1)
        self.count += 1

    def similarity(self, feature: np.ndarray) -> float:
        if self.count == 0:
            raise ColdStartError("feature buffer is empty")
        feature = np.asarray(feature, dtype=np.float64)
        if feature.shape != (self.dim,):
            raise ShapeError(f"feature shape {feature.shape} does not match ({self.dim},)")
        return float(feature @ self.mean)

    def rebuild(self, features: np.ndarray) -> None:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if features.shape[1] != self.dim:
            raise ShapeError(f"features of width {features.shape[1]} for buffer of {self.dim}")
        self.count = features.shape[0]
        self.mean = features.mean(axis=0) if self.count else np.zeros(self.dim)


def feature_distance(
    feature: np.ndarray, buffer: FeatureBuffer, mode: DistanceMode = DistanceMode.NOVELTY,
) -> float:
    """1 - similarity in novelty mode (larger = less familiar), raw similarity otherwise."""
    similarity = buffer.similarity(feature)
    return 1.0 - similarity if mode is DistanceMode.NOVELTY else similarity


@dataclass(frozen=True)
class AdviceDecision:
    """Outcome of one advise check; score/threshold are None when not computed."""

    advise: bool
    score: float | None = None
    threshold: float | None = None


class AdviceSelector:
    def __init__(self, byol: ActionByol, section: SelectorSection) -> None:
        self.byol = byol
        self.section = section
        self.buffer = FeatureBuffer(section.feature_dim)
        self.queue = AdaptiveQueue(section.queue_length, section.threshold_percentile)
        self._distance_sum = 0.0
        self._distance_count = 0

    @property
    def ready(self) -> bool:
        """True once an encoder has been trained and the buffer filled."""
        return self.byol.rounds > 0 and self.buffer.count > 0

    @property
    def mean_distance(self) -> float:
        """Normalizer for the intrinsic reward; 1.0 until it is meaningful."""
        if self._distance_count < 2:
            return 1.0
        mean = self._distance_sum / self._distance_count
        return mean if mean > 0.0 else 1.0

    def distance(self, state: np.ndarray) -> float:
        return feature_distance(
            self.byol.extract_feature(state), self.buffer, self.section.distance_mode,
        )

    def observe(self, state: np.ndarray) -> AdviceDecision:
        """Score a state, update buffer and queue, and decide whether to advise.

        Always advises during cold start and while the queue is filling.
        """
        if not self.ready:
            return AdviceDecision(advise=True)
        feature = self.byol.extract_feature(state)
        distance = feature_distance(feature, self.buffer, self.section.distance_mode)
        threshold = self.queue.threshold()
        self.buffer.fold(feature)
        self.queue.push(distance)
        self._distance_sum += distance
        self._distance_count += 1
        advise = True if threshold is None else should_advise(distance, threshold)
        return AdviceDecision(advise=advise, score=distance, threshold=threshold)

    def distance_only(self, state: np.ndarray) -> float | None:
        """Distance without touching buffer, queue or the running mean."""
        return self.distance(state) if self.ready else None

    def retrain(
        self, transitions: list[Transition], rng: np.random.Generator,
    ) -> TrainingReport:
        """Train action-BYOL on the transitions, then rebuild from their states."""
        if not transitions:
            raise EmptyDatasetError("selector retraining needs transitions")
        states = np.stack([t.state for t in transitions])
        actions = np.array([t.action for t in transitions], dtype=np.int64)
        next_states = np.stack([t.next_state for t in transitions])
        report = self.byol.train(states, actions, next_states, rng)

        self.buffer.rebuild(self.byol.extract_features(states))
        self.queue.clear()
        self._distance_sum = 0.0
        self._distance_count = 0
        log.info(
            "action-BYOL round %d on %d transitions", self.byol.rounds, len(transitions),
            extra={"loss": report.final_loss},
        )
        return report
