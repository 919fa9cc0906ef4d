"""Adaptive percentile thresholds over a sliding window of scores.

The contrastive selector, the IAA importance baseline and the ANA novelty
baseline all advise when the current score exceeds a percentile of the
most recent scores.
"""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Iterable

import numpy as np

from core.errors import EmptyDatasetError


def percentile_index(n: int, percentile: float) -> int:
    """Ascending-sort index of the ``percentile`` value among n items: ceil(p*n) - 1."""
    if n <= 0:
        raise EmptyDatasetError("percentile of an empty collection")
    # 1e-9 absorbs float noise such as 0.7 * 200 = 140.00000000000003
    return min(n - 1, max(0, math.ceil(percentile * n - 1e-9) - 1))


def percentile_value(values: Iterable[float], percentile: float) -> float:
    ordered = np.sort(np.fromiter(values, dtype=np.float64))
    return float(ordered[percentile_index(ordered.shape[0], percentile)])


def should_advise(score: float, threshold: float) -> bool:
    """Strict: a score equal to the threshold does not trigger advice."""
    return score > threshold


class AdaptiveQueue:
    """FIFO of the last ``capacity`` scores; the threshold exists only once full."""

    def __init__(self, capacity: int, percentile: float) -> None:
        if capacity <= 0:
            raise ValueError(f"queue capacity must be positive, got {capacity}")
        if not 0.0 < percentile <= 1.0:
            raise ValueError(f"percentile must be in (0, 1], got {percentile}")
        self.capacity = capacity
        self.percentile = percentile
        self._values: deque[float] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._values)

    @property
    def ready(self) -> bool:
        return len(self._values) == self.capacity

    def push(self, value: float) -> None:
        self._values.append(float(value))

    def values(self) -> list[float]:
        return list(self._values)

    def clear(self) -> None:
        self._values.clear()

    def threshold(self) -> float | None:
        """Current percentile value, or None while the queue is still filling."""
        if not self.ready:
            return None
        return percentile_value(self._values, self.percentile)
