"""Central finite differences for checking hand-written backward passes."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np


def numerical_grad(f: Callable[[], float], param: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """d f / d param by central differences, perturbing param in place."""
    grad = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = param[idx]
        param[idx] = original + h
        plus = f()
        param[idx] = original - h
        minus = f()
        param[idx] = original
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """|a - n| / (|a| + |n|) over whole arrays, 0 when both vanish."""
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def max_relative_error(
    f: Callable[[], float],
    params: Sequence[np.ndarray],
    analytic: Sequence[np.ndarray],
    h: float = 1e-5,
) -> float:
    return max(
        relative_error(g, numerical_grad(f, p, h)) for p, g in zip(params, analytic)
    )
