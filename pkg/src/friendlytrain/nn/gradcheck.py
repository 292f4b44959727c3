"""Finite-difference verification of analytic gradients.

Central differences with a fixed step are compared against the gradients
returned by ``Network.backward`` for every parameter entry AND every
input entry. The relative error uses a guarded denominator so that tiny
gradients do not blow the ratio up:

    rel = |analytic - fd| / max(1, |analytic| + |fd|)

Stochastic layers are handled by freezing: each forward evaluation uses a
fresh generator with the same seed (identical dropout masks), and batch
normalization running averages are restored after every call so the loss
is a pure function of parameters and inputs.
"""

from __future__ import annotations

import numpy as np

from .architectures import build_network
from .losses import cross_entropy
from .layers import MODE_EVAL, MODE_TRAIN

GRAD_TOL = 1e-4
DEFAULT_EPSILON = 1e-5


def _frozen_loss(net, x, labels, mode, mask_seed, buffers0):
    logits, _ = net.forward(x, mode, rng=np.random.default_rng(mask_seed))
    loss, _ = cross_entropy(logits, labels)
    if buffers0:
        net.load_buffers(buffers0)
    return loss


def grad_check(net, x, labels, epsilon=DEFAULT_EPSILON, mode=MODE_EVAL, mask_seed=0):
    """Max relative error between analytic and finite-difference gradients."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=np.float64)
    buffers0 = {k: v.copy() for k, v in net.buffers().items()}

    logits, cache = net.forward(x, mode, rng=np.random.default_rng(mask_seed))
    _, gl = cross_entropy(logits, labels)
    param_grads, input_grad = net.backward(cache, gl)
    if buffers0:
        net.load_buffers(buffers0)

    worst = 0.0

    def rel(analytic, fd):
        return abs(analytic - fd) / max(1.0, abs(analytic) + abs(fd))

    for name, arr in net.parameters().items():
        g = param_grads[name]
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + epsilon
            lp = _frozen_loss(net, x, labels, mode, mask_seed, buffers0)
            arr[idx] = orig - epsilon
            lm = _frozen_loss(net, x, labels, mode, mask_seed, buffers0)
            arr[idx] = orig
            worst = max(worst, rel(g[idx], (lp - lm) / (2.0 * epsilon)))

    probe = x.copy()
    for idx in np.ndindex(x.shape):
        orig = probe[idx]
        probe[idx] = orig + epsilon
        lp = _frozen_loss(net, probe, labels, mode, mask_seed, buffers0)
        probe[idx] = orig - epsilon
        lm = _frozen_loss(net, probe, labels, mode, mask_seed, buffers0)
        probe[idx] = orig
        worst = max(worst, rel(input_grad[idx], (lp - lm) / (2.0 * epsilon)))
    return worst


# Tiny probe architectures, one or more per layer kind. Input widths are
# small on purpose: the finite-difference sweep is O(parameters) forwards.
_OUT = {"kind": "linear", "units": None}
_PROBES = {
    "linear": [((6,), [{"kind": "linear", "units": 4}, _OUT])],
    "tanh": [((5,), [{"kind": "linear", "units": 4}, {"kind": "tanh"}, _OUT])],
    "relu": [((5,), [{"kind": "linear", "units": 4}, {"kind": "relu"}, _OUT])],
    "dropout": [((5,), [{"kind": "linear", "units": 5}, {"kind": "dropout", "p": 0.4}, _OUT])],
    "batchnorm": [
        ((5,), [{"kind": "linear", "units": 4}, {"kind": "batchnorm"}, {"kind": "tanh"}, _OUT]),
        ((1, 4, 4), [
            {"kind": "conv2d", "channels": 2, "kernel": 3, "padding": 1},
            {"kind": "batchnorm"},
            {"kind": "relu"},
            {"kind": "flatten"},
            _OUT,
        ]),
    ],
    "conv2d": [
        ((2, 5, 5), [
            {"kind": "conv2d", "channels": 3, "kernel": 3, "stride": 1, "padding": 1},
            {"kind": "tanh"},
            {"kind": "conv2d", "channels": 2, "kernel": 3, "stride": 2, "padding": 0},
            {"kind": "flatten"},
            _OUT,
        ]),
    ],
    "maxpool2d": [
        ((2, 6, 6), [
            {"kind": "conv2d", "channels": 2, "kernel": 3, "padding": 1},
            {"kind": "maxpool2d", "kernel": 2, "stride": 2},
            {"kind": "flatten"},
            _OUT,
        ]),
        ((1, 5, 5), [
            {"kind": "maxpool2d", "kernel": 3, "stride": 1},
            {"kind": "flatten"},
            _OUT,
        ]),
    ],
    "flatten": [((1, 3, 3), [{"kind": "flatten"}, _OUT])],
}

# Tiny instantiations of the shipped presets (input geometry is free).
_PRESET_PROBES = {
    "fc-a": (12,),
    "cnn-a-small": (1, 4, 4),
    "toy-moons": (2,),
}


def _run_probe(input_shape, layers, seed, epsilon, class_count=3, batch=3):
    rng = np.random.default_rng(seed)
    net = build_network({"layers": list(layers)}, input_shape, class_count, seed=seed)
    width = int(np.prod(input_shape))
    x = rng.standard_normal((batch, width))
    labels = rng.integers(0, class_count, size=batch)
    worst = 0.0
    for mode in (MODE_EVAL, MODE_TRAIN):
        worst = max(worst, grad_check(net, x, labels, epsilon=epsilon, mode=mode,
                                      mask_seed=seed + 1))
    return worst


def layer_report(seed=0, epsilon=DEFAULT_EPSILON):
    """Max relative gradient error per layer kind, over eval and train modes."""
    report = {}
    for kind, probes in _PROBES.items():
        worst = 0.0
        for input_shape, layers in probes:
            worst = max(worst, _run_probe(input_shape, layers, seed, epsilon))
        report[kind] = worst
    return report


def preset_report(seed=0, epsilon=DEFAULT_EPSILON, presets=None):
    """Max relative gradient error for each shipped preset on tiny inputs."""
    report = {}
    for name in presets or _PRESET_PROBES:
        input_shape = _PRESET_PROBES[name]
        batch = 2 if len(input_shape) == 3 else 4
        report[name] = _run_preset(name, input_shape, seed, epsilon, batch)
    return report


def _run_preset(name, input_shape, seed, epsilon, batch):
    rng = np.random.default_rng(seed)
    net = build_network(name, input_shape, class_count=3, seed=seed)
    x = rng.standard_normal((batch, int(np.prod(input_shape))))
    labels = rng.integers(0, 3, size=batch)
    worst = 0.0
    for mode in (MODE_EVAL, MODE_TRAIN):
        worst = max(worst, grad_check(net, x, labels, epsilon=epsilon, mode=mode,
                                      mask_seed=seed + 1))
    return worst
