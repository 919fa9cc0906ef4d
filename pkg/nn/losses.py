"""Losses and their gradients with respect to network outputs."""

from __future__ import annotations

import numpy as np

from core.errors import DegenerateVectorError, ShapeError


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """<a, b> / (|a| |b|), in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"cosine_similarity shapes differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateVectorError("cosine similarity of a zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """L2-normalize a vector or each row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateVectorError("cannot normalize a zero-norm vector")
    return x / norms


def byol_regression_loss(
    prediction: np.ndarray, target: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Mean over rows of |p/|p| - z/|z||^2 = 2 - 2 cos(p, z).

    The target is a constant (stop-gradient); only d(loss)/d(prediction)
    is returned.
    """
    p = np.atleast_2d(np.asarray(prediction, dtype=np.float64))
    z = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if p.shape != z.shape:
        raise ShapeError(f"prediction {p.shape} and target {z.shape} differ")
    p_norm = np.linalg.norm(p, axis=1, keepdims=True)
    z_norm = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(p_norm == 0.0) or np.any(z_norm == 0.0):
        raise DegenerateVectorError("zero-norm prediction or target projection")

    p_hat = p / p_norm
    z_hat = z / z_norm
    cos = np.sum(p_hat * z_hat, axis=1, keepdims=True)
    batch = p.shape[0]
    loss = float(np.mean(2.0 - 2.0 * cos))
    grad = -2.0 * (z_hat - cos * p_hat) / p_norm / batch
    if np.ndim(prediction) == 1:
        grad = grad[0]
    return loss, grad


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(np.asarray(logits, dtype=np.float64)))


def nll_loss(logits: np.ndarray, target_action: int) -> tuple[float, np.ndarray]:
    """-log softmax(logits)[target]; gradient softmax(logits) - one_hot(target)."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ShapeError(f"nll_loss expects a vector of logits, got shape {logits.shape}")
    if not 0 <= target_action < logits.shape[0]:
        raise IndexError(f"target action {target_action} outside [0, {logits.shape[0]})")
    logp = log_softmax(logits)
    grad = np.exp(logp)
    grad[target_action] -= 1.0
    return float(-logp[target_action]), grad


def nll_loss_batch(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over a batch of (logits, action) rows."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(f"logits {logits.shape} and targets {targets.shape} do not align")
    if np.any(targets < 0) or np.any(targets >= logits.shape[1]):
        raise IndexError("target action outside the action space")
    rows = np.arange(logits.shape[0])
    logp = log_softmax(logits)
    grad = np.exp(logp)
    grad[rows, targets] -= 1.0
    batch = logits.shape[0]
    return float(-np.mean(logp[rows, targets])), grad / batch


def mse_loss(prediction: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all elements."""
    prediction = np.asarray(prediction, dtype=np.float64)
    diff = prediction - np.asarray(target, dtype=np.float64)
    if diff.shape != prediction.shape:
        raise ShapeError(f"prediction {prediction.shape} and target shapes do not align")
    return float(np.mean(diff**2)), 2.0 * diff / diff.size
