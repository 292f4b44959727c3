"""Optimizers: Adam for the weights, fixed-rate descent for perturbations.

The weight optimizer is standard Adam with bias correction; its defaults
(alpha 1e-3, beta1 0.9, beta2 0.999, epsilon 1e-8) are the canonical
ones. The perturbation update is plain gradient descent with a fixed
rate and a per-example freeze mask: frozen rows pass through bitwise
unchanged, which is what implements the confidence early stop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class AdamSettings:
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def validate(self, where="adam"):
        if not self.alpha > 0:
            raise ConfigError(f"{where}.alpha: must be positive, got {self.alpha!r}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise ConfigError(f"{where}.{name}: must be in [0, 1), got {v!r}")
        if not self.epsilon > 0:
            raise ConfigError(f"{where}.epsilon: must be positive, got {self.epsilon!r}")
        return self


class Adam:
    """Adam over a named parameter dict; updates the arrays in place.

    The parameter dict maps names to the live arrays of a network, so a
    step mutates the network directly. Moment buffers are keyed the same
    way and the step counter increments by exactly one per call.
    """

    def __init__(self, params, settings: AdamSettings | None = None):
        self.settings = (settings or AdamSettings()).validate()
        self.params = dict(params)
        self.step_count = 0
        self.first_moment = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.second_moment = {k: np.zeros_like(v) for k, v in self.params.items()}

    def step(self, grads):
        if set(grads) != set(self.params):
            raise ShapeError("gradient names do not match the optimized parameters")
        s = self.settings
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - s.beta1 ** t
        bc2 = 1.0 - s.beta2 ** t
        for name, p in self.params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"gradient {name}: shape {g.shape} != parameter {p.shape}")
            m = self.first_moment[name]
            v = self.second_moment[name]
            m *= s.beta1
            m += (1.0 - s.beta1) * g
            v *= s.beta2
            v += (1.0 - s.beta2) * (g * g)
            m_hat = m / bc1
            v_hat = v / bc2
            p -= s.alpha * m_hat / (np.sqrt(v_hat) + s.epsilon)


def delta_step(delta, delta_grad, eta, freeze_mask=None):
    """One fixed-rate descent step on the perturbation matrix.

    Returns a new array: row i equals ``delta[i] - eta * delta_grad[i]``
    for active rows and is a bitwise copy of ``delta[i]`` for frozen ones
    (frozen rows are never touched, not even by adding zero, so signed
    zeros and such survive).
    """
    delta = np.asarray(delta, dtype=np.float64)
    delta_grad = np.asarray(delta_grad, dtype=np.float64)
    if delta.shape != delta_grad.shape:
        raise ShapeError(f"delta shape {delta.shape} != delta_grad shape {delta_grad.shape}")
    if eta <= 0:
        raise ConfigError(f"eta: must be positive, got {eta!r}")
    out = delta.copy()
    if freeze_mask is None:
        out -= eta * delta_grad
        return out
    freeze_mask = np.asarray(freeze_mask, dtype=bool)
    if freeze_mask.shape != (delta.shape[0],):
        raise ShapeError(
            f"freeze_mask shape {freeze_mask.shape} != (batch,) = ({delta.shape[0]},)"
        )
    active = ~freeze_mask
    if active.any():
        out[active] -= eta * delta_grad[active]
    return out
