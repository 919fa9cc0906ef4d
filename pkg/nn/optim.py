"""Adam with bias correction."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from core.errors import ShapeError
from nn.mlp import Mlp


@dataclass
class AdamState:
    """Moment accumulators for one parameter list."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float, **kwargs: float) -> AdamState:
        return cls(
            lr=lr,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kwargs,  # type: ignore[arg-type]
        )


def adam_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
) -> tuple[Sequence[np.ndarray], AdamState]:
    """One Adam update, applied to ``params`` in place."""
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError(
            f"adam_step got {len(params)} params, {len(grads)} grads, {len(state.m)} moments"
        )
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"adam_step shape mismatch: {p.shape}, {g.shape}, {m.shape}")

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return params, state


class Adam:
    """Adam bound to the parameters of one or more networks."""

    def __init__(self, nets: Sequence[Mlp], lr: float) -> None:
        self.nets = list(nets)
        self.state = AdamState.for_params(self._params(), lr)

    def _params(self) -> list[np.ndarray]:
        return [p for net in self.nets for p in net.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        adam_step(self._params(), grads, self.state)
        for net in self.nets:
            net.touch()


def clip_grad_norm(
    grads: Sequence[np.ndarray], max_norm: float,
) -> tuple[list[np.ndarray], float]:
    """Rescale ``grads`` so their joint L2 norm is at most ``max_norm``.

    Returns the (possibly scaled) gradients and the norm before clipping.
    """
    if max_norm <= 0.0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if norm <= max_norm:
        return list(grads), norm
    scale = max_norm / norm
    return [g * scale for g in grads], norm
