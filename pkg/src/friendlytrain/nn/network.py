"""Feed-forward network: an ordered layer stack with exact gradients.

``forward`` returns the logits together with a single-use cache;
``backward`` consumes the cache and returns gradients with respect to
every parameter AND with respect to the input batch. The input gradient
is what the input-perturbation inner loop descends on.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolation, NumericFailure, ShapeError
from .layers import MODES, MODE_TRAIN, Layer


@dataclass
class ForwardCache:
    """Holds per-layer activations from one forward pass; consumed once."""

    mode: str
    layer_caches: list = field(repr=False)
    input_was_flat: bool = False
    batch_size: int = 0
    consumed: bool = False


class Network:
    """An ordered stack of layers mapping a batch of inputs to logits.

    ``input_shape`` is the per-example shape: ``(d,)`` for flat features
    or ``(channels, h, w)`` for images. Flat batches are accepted either
    way; when the network expects images, a flat ``(b, d)`` batch is
    reshaped internally and the input gradient is returned flat again,
    so callers can always treat examples as d-dimensional vectors.

    All randomness is derived from ``seed``: stream 0 initializes the
    weights, stream 1 drives dropout masks during training.
    """

    def __init__(self, layers: list[Layer], input_shape, class_count: int, seed: int = 0):
        if class_count < 2:
            raise ShapeError(f"class_count must be at least 2, got {class_count}")
        self.input_shape = tuple(int(s) for s in input_shape)
        self.class_count = int(class_count)
        self.seed = int(seed)
        self.layers = list(layers)
        self._dropout_rng = np.random.default_rng([self.seed, 1])

        init_rng = np.random.default_rng([self.seed, 0])
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.build(shape, init_rng)
            except ShapeError as e:
                raise ShapeError(f"layer {i}: {e}") from None
        if shape != (self.class_count,):
            raise ShapeError(
                f"network output shape {shape} does not match class count ({self.class_count},)"
            )

    # ----- parameter access -------------------------------------------------

    def parameters(self) -> "OrderedDict[str, np.ndarray]":
        out = OrderedDict()
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                out[f"{i}.{name}"] = arr
        return out

    def buffers(self) -> "OrderedDict[str, np.ndarray]":
        out = OrderedDict()
        for i, layer in enumerate(self.layers):
            for name, arr in layer.buffers.items():
                out[f"{i}.{name}"] = arr
        return out

    def load_parameters(self, values):
        self._load_into(self.parameters(), values, "parameter")

    def load_buffers(self, values):
        self._load_into(self.buffers(), values, "buffer")

    @staticmethod
    def _load_into(target, values, what):
        if set(target) != set(values):
            raise ShapeError(f"{what} names do not match the architecture")
        for name, arr in target.items():
            src = np.asarray(values[name], dtype=np.float64)
            if src.shape != arr.shape:
                raise ShapeError(f"{what} {name}: shape {src.shape} != expected {arr.shape}")
            arr[...] = src

    def parameter_count(self) -> int:
        return sum(arr.size for arr in self.parameters().values())

    def fingerprint(self) -> str:
        """Hash of all parameters and buffers; equal iff state is bitwise equal."""
        h = hashlib.sha256()
        for name, arr in list(self.parameters().items()) + list(self.buffers().items()):
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    # ----- forward / backward ----------------------------------------------

    def _coerce_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        flat_width = int(np.prod(self.input_shape))
        if x.ndim == 2 and x.shape[1] == flat_width:
            return x.reshape((x.shape[0],) + self.input_shape), True
        if x.ndim == 1 + len(self.input_shape) and x.shape[1:] == self.input_shape:
            return x, False
        raise ShapeError(
            f"input batch shape {x.shape} matches neither (b, {flat_width}) "
            f"nor (b,) + {self.input_shape}"
        )

    def forward(self, x, mode, rng=None):
        """Run the stack on a batch; returns (logits, cache).

        ``rng`` overrides the internal dropout stream, which lets callers
        freeze masks (gradient checking) without touching network state.
        """
        if mode not in MODES:
            raise ShapeError(f"unknown mode {mode!r}, expected one of {MODES}")
        x, was_flat = self._coerce_input(x)
        if not np.isfinite(x).all():
            raise NumericFailure(f"non-finite value in the input batch (mode {mode})")
        rng = rng if rng is not None else self._dropout_rng
        caches = []
        cur = x
        for i, layer in enumerate(self.layers):
            cur, c = layer.forward(cur, mode, rng)
            if not np.isfinite(cur).all():
                raise NumericFailure(
                    f"non-finite activation after layer {i} ({layer.kind}) in mode {mode}"
                )
            caches.append(c)
        cache = ForwardCache(
            mode=mode,
            layer_caches=caches,
            input_was_flat=was_flat,
            batch_size=x.shape[0],
        )
        return cur, cache

    def backward(self, cache: ForwardCache, grad_logits):
        """Backpropagate; returns (param_grads, input_grad). Cache is single-use."""
        if cache.consumed:
            raise ContractViolation("forward cache already consumed by a backward call")
        cache.consumed = True
        grad_logits = np.asarray(grad_logits, dtype=np.float64)
        expected = (cache.batch_size, self.class_count)
        if grad_logits.shape != expected:
            raise ShapeError(f"grad_logits shape {grad_logits.shape} != {expected}")

        param_grads = OrderedDict()
        d = grad_logits
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            grads, d = layer.backward(d, cache.layer_caches[i])
            for name, g in grads.items():
                param_grads[f"{i}.{name}"] = g
        ordered = OrderedDict(
            (name, param_grads[name]) for name in self.parameters()
        )
        if cache.input_was_flat:
            d = d.reshape(cache.batch_size, -1)
        return ordered, d
