"""From-scratch neural network core: layers, losses, gradient checking."""

from .architectures import PRESET_NAMES, build_network, load_descriptor, preset_path
from .gradcheck import GRAD_TOL, grad_check, layer_report, preset_report
from .layers import (
    MODE_EVAL,
    MODE_SIMPLIFY,
    MODE_TRAIN,
    MODES,
    BatchNorm,
    Conv2d,
    Dropout,
    Flatten,
    Layer,
    Linear,
    MaxPool2d,
    ReLU,
    Tanh,
)
from .losses import cross_entropy, log_softmax, per_example_cross_entropy, softmax
from .network import ForwardCache, Network

__all__ = [
    "PRESET_NAMES",
    "build_network",
    "load_descriptor",
    "preset_path",
    "GRAD_TOL",
    "grad_check",
    "layer_report",
    "preset_report",
    "MODE_EVAL",
    "MODE_SIMPLIFY",
    "MODE_TRAIN",
    "MODES",
    "BatchNorm",
    "Conv2d",
    "Dropout",
    "Flatten",
    "Layer",
    "Linear",
    "MaxPool2d",
    "ReLU",
    "Tanh",
    "cross_entropy",
    "log_softmax",
    "per_example_cross_entropy",
    "softmax",
    "ForwardCache",
    "Network",
]
