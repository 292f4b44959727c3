"""Finite-difference verification harness, plus a fault-injection check
that the harness actually catches broken gradients."""

import numpy as np
import pytest

from friendlytrain.nn import MODE_EVAL, MODE_TRAIN, Linear, Network, Tanh
from friendlytrain.nn.gradcheck import GRAD_TOL, grad_check, layer_report, preset_report


def test_layer_report_covers_inventory_and_passes():
    report = layer_report(seed=0)
    expected = {"linear", "conv2d", "maxpool2d", "relu", "tanh",
                "batchnorm", "dropout", "flatten"}
    assert set(report) == expected
    for kind, worst in report.items():
        assert worst < GRAD_TOL, f"{kind}: {worst}"
        assert worst > 0.0, f"{kind}: a literally zero error means the probe is vacuous"


def test_preset_report_all_pass():
    report = preset_report(seed=0, presets=("fc-a", "toy-moons"))
    assert set(report) == {"fc-a", "toy-moons"}
    for name, worst in report.items():
        assert worst < GRAD_TOL, f"{name}: {worst}"


def test_grad_check_on_small_network():
    net = Network([Linear(6), Tanh(), Linear(3)], input_shape=(4,), class_count=3, seed=1)
    x = np.random.default_rng(0).standard_normal((3, 4))
    labels = np.array([0, 2, 1])
    err = grad_check(net, x, labels, mode=MODE_EVAL)
    assert err < GRAD_TOL


def test_grad_check_train_mode_is_repeatable():
    """Dropout masks come from the mask seed, so two calls agree exactly."""
    net = Network([Linear(6), Tanh(), Linear(3)], input_shape=(4,), class_count=3, seed=1)
    x = np.random.default_rng(0).standard_normal((3, 4))
    labels = np.array([0, 2, 1])
    a = grad_check(net, x, labels, mode=MODE_TRAIN, mask_seed=7)
    b = grad_check(net, x, labels, mode=MODE_TRAIN, mask_seed=7)
    assert a == b


def test_fault_injection_is_detected():
    """Corrupting one backward pass must blow past the tolerance."""

    class BrokenTanh(Tanh):
        def backward(self, grad_out, cache):
            grads, d_in = super().backward(grad_out, cache)
            return grads, d_in * 1.01

    net = Network([Linear(6), BrokenTanh(), Linear(3)],
                  input_shape=(4,), class_count=3, seed=1)
    x = np.random.default_rng(0).standard_normal((3, 4))
    labels = np.array([0, 2, 1])
    err = grad_check(net, x, labels, mode=MODE_EVAL)
    assert err > GRAD_TOL


def test_bias_fault_injection_is_detected():
    class BrokenLinear(Linear):
        def backward(self, grad_out, cache):
            grads, d_in = super().backward(grad_out, cache)
            grads["bias"] = grads["bias"] + 0.01
            return grads, d_in

    net = Network([BrokenLinear(3)], input_shape=(4,), class_count=3, seed=2)
    x = np.random.default_rng(1).standard_normal((2, 4))
    labels = np.array([0, 1])
    assert grad_check(net, x, labels, mode=MODE_EVAL) > GRAD_TOL


def test_buffers_restored_after_check():
    """Finite differencing in train mode must not leak batchnorm updates."""
    from friendlytrain.nn import BatchNorm

    net = Network([Linear(4), BatchNorm(), Tanh(), Linear(2)],
                  input_shape=(3,), class_count=2, seed=0)
    before = {k: v.copy() for k, v in net.buffers().items()}
    x = np.random.default_rng(2).standard_normal((4, 3))
    grad_check(net, x, np.array([0, 1, 0, 1]), mode=MODE_TRAIN, mask_seed=3)
    after = net.buffers()
    for k in before:
        assert np.array_equal(before[k], after[k]), k
