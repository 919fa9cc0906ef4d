"""Dense ReLU network with an explicit forward cache (NumPy, float64).

Every network in the framework is an Mlp: the student trunk and heads,
the action-BYOL encoder/projector/predictor pairs, the reuse model and
both RND networks. Parameters are plain arrays updated in place by the
optimizer; ``version`` is bumped on every mutation so a cache taken
before an update cannot be used for backward after it.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from core.errors import CacheError, ShapeError


@dataclass
class ForwardCache:
    """Activation record produced by Mlp.forward and consumed by Mlp.backward."""

    owner: int
    version: int
    batched: bool
    inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    masks: list[np.ndarray] | None


@dataclass
class Gradients:
    """Parameter gradients (W0, b0, W1, b1, ...) plus the gradient wrt the input."""

    params: list[np.ndarray]
    input: np.ndarray


class Mlp:
    """Feed-forward network: ReLU after every hidden layer, linear output.

    Dropout (inverted, scaled by 1/(1-p)) is applied after each hidden
    activation when the forward pass runs in training mode or with explicit
    masks. ``activate_output`` adds a ReLU on the last layer, used when the
    network is a trunk feeding further heads.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        *,
        dropout_rate: float = 0.0,
        activate_output: bool = False,
        output_scale: float = 1.0,
        rng_seed: int = 0,
    ) -> None:
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ShapeError(f"layer_sizes must be >= 2 positive integers, got {sizes}")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
        if output_scale <= 0.0:
            raise ValueError(f"output_scale must be positive, got {output_scale}")

        self.layer_sizes = sizes
        self.dropout_rate = float(dropout_rate)
        self.activate_output = activate_output
        self.rng_seed = rng_seed
        self.version = 0

        init_seq, mask_seq = np.random.SeedSequence(rng_seed).spawn(2)
        init_rng = np.random.default_rng(init_seq)
        self._mask_rng = np.random.default_rng(mask_seq)

        # Kaiming-uniform for ReLU: U(-sqrt(6/fan_in), sqrt(6/fan_in)); the last
        # layer bound is multiplied by output_scale
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = math.sqrt(6.0 / fan_in)
            if len(self.weights) == len(sizes) - 2:
                bound *= output_scale
            self.weights.append(init_rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    # -- parameters ---------------------------------------------------------

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    @property
    def params(self) -> list[np.ndarray]:
        """Live references to the parameter arrays: W0, b0, W1, b1, ..."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def touch(self) -> None:
        """Record that parameters changed in place."""
        self.version += 1

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        """Overwrite every parameter (copying), keeping shapes."""
        current = self.params
        if len(params) != len(current):
            raise ShapeError(f"expected {len(current)} parameter arrays, got {len(params)}")
        for dst, src in zip(current, params):
            src = np.asarray(src, dtype=np.float64)
            if dst.shape != src.shape:
                raise ShapeError(f"parameter shape {src.shape} != {dst.shape}")
            dst[...] = src
        self.touch()

    def copy_from(self, other: Mlp) -> None:
        """Hard copy of another network's parameters (same architecture)."""
        if other.layer_sizes != self.layer_sizes:
            raise ShapeError(f"cannot copy {other.layer_sizes} into {self.layer_sizes}")
        self.set_params(other.params)

    def clone(self, rng_seed: int | None = None) -> Mlp:
        """Independent copy with identical parameters."""
        twin = Mlp(
            self.layer_sizes,
            dropout_rate=self.dropout_rate,
            activate_output=self.activate_output,
            rng_seed=self.rng_seed if rng_seed is None else rng_seed,
        )
        twin.copy_from(self)
        return twin

    # -- dropout ------------------------------------------------------------

    def sample_masks(self, batch_size: int) -> list[np.ndarray]:
        """Draw scaled dropout masks (one per hidden layer) from the network's own stream."""
        keep = 1.0 - self.dropout_rate
        return [
            (self._mask_rng.random((batch_size, size)) < keep) / keep
            for size in self.layer_sizes[1:-1]
        ]

    # -- forward / backward ---------------------------------------------------

    def forward(
        self,
        x: np.ndarray,
        masks: list[np.ndarray] | None = None,
        training: bool = False,
    ) -> tuple[np.ndarray, ForwardCache]:
        """Evaluate the network on one input vector or a (batch, input) matrix."""
        x = np.asarray(x, dtype=np.float64)
        batched = x.ndim == 2
        if x.ndim not in (1, 2) or x.shape[-1] != self.input_size:
            raise ShapeError(f"input shape {x.shape} does not match input size {self.input_size}")
        h = x if batched else x[None, :]

        if masks is not None and self.dropout_rate == 0.0:
            raise ShapeError("dropout masks given to a network with dropout_rate 0")
        if masks is None and training and self.dropout_rate > 0.0:
            masks = self.sample_masks(h.shape[0])
        if masks is not None:
            if len(masks) != self.n_layers - 1:
                raise ShapeError(f"expected {self.n_layers - 1} dropout masks, got {len(masks)}")
            masks = [m if m.ndim == 2 else m[None, :] for m in masks]

        inputs: list[np.ndarray] = []
        pre: list[np.ndarray] = []
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if (i < last or self.activate_output) else z
            if masks is not None and i < last:
                h = h * masks[i]

        cache = ForwardCache(
            owner=id(self),
            version=self.version,
            batched=batched,
            inputs=inputs,
            pre_activations=pre,
            masks=masks,
        )
        return (h if batched else h[0]), cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Deterministic (dropout-off) output."""
        return self.forward(x)[0]

    def backward(self, cache: ForwardCache, grad_output: np.ndarray) -> Gradients:
        """Backpropagate d(loss)/d(output); parameters are not modified."""
        if cache.owner != id(self) or cache.version != self.version:
            raise CacheError("forward cache is stale or was produced by another network")
        g = np.asarray(grad_output, dtype=np.float64)
        if not cache.batched:
            g = g[None, :]
        expected = cache.pre_activations[-1].shape
        if g.shape != expected:
            raise ShapeError(f"output gradient shape {g.shape} != {expected}")

        last = self.n_layers - 1
        grads: list[np.ndarray] = [np.empty(0)] * (2 * self.n_layers)
        for i in range(last, -1, -1):
            if cache.masks is not None and i < last:
                g = g * cache.masks[i]
            if i < last or self.activate_output:
                g = g * (cache.pre_activations[i] > 0.0)
            grads[2 * i] = cache.inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T

        return Gradients(params=grads, input=g if cache.batched else g[0])
