"""Layer implementations for the from-scratch network.

Every layer follows the same small protocol:

* ``build(in_shape, rng)`` resolves sizes from the incoming per-example
  shape, allocates parameters, and returns the outgoing per-example shape.
* ``forward(x, mode, rng)`` returns ``(y, cache)`` where ``cache`` holds
  whatever the matching ``backward`` call needs.
* ``backward(d_out, cache)`` returns ``(param_grads, d_in)`` with
  ``param_grads`` keyed like ``self.params``.

Arrays are 64-bit floats throughout. ``mode`` is one of ``train``,
``simplify``, ``eval``:

* ``train``: dropout samples a mask, batchnorm uses batch statistics and
  updates its running averages.
* ``simplify``: used inside the input-perturbation inner loop. Dropout is
  replaced by its deterministic expectation (identity under inverted
  dropout) and batchnorm uses batch statistics WITHOUT touching the
  running averages, so repeated inner passes neither inject mask noise
  into input gradients nor pollute later evaluation.
* ``eval``: dropout is identity, batchnorm uses running statistics.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError

MODE_TRAIN = "train"
MODE_SIMPLIFY = "simplify"
MODE_EVAL = "eval"
MODES = (MODE_TRAIN, MODE_SIMPLIFY, MODE_EVAL)


def _glorot_uniform(rng, shape, fan_in, fan_out):
    # Uniform(-s, s), s = sqrt(6 / (fan_in + fan_out)).
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


class Layer:
    """Base class; concrete layers override build/forward/backward."""

    kind = "?"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.in_shape: tuple[int, ...] | None = None
        self.out_shape: tuple[int, ...] | None = None

    def build(self, in_shape, rng):
        self.in_shape = tuple(in_shape)
        self.out_shape = self._build(self.in_shape, rng)
        return self.out_shape

    def _build(self, in_shape, rng):
        raise NotImplementedError

    def forward(self, x, mode, rng):
        raise NotImplementedError

    def backward(self, d_out, cache):
        raise NotImplementedError

    def _shape_error(self, detail):
        return ShapeError(f"{self.kind}: {detail}")


class Linear(Layer):
    """Affine map y = x @ W + b; input features resolved at build time."""

    kind = "linear"

    def __init__(self, units):
        super().__init__()
        if not isinstance(units, int) or units < 1:
            raise ConfigError(f"linear.units: must be a positive integer, got {units!r}")
        self.units = units

    def _build(self, in_shape, rng):
        if len(in_shape) != 1:
            raise self._shape_error(
                f"expects flat input of shape (d,), got {in_shape}; add a flatten layer first"
            )
        d = in_shape[0]
        self.params["weight"] = _glorot_uniform(rng, (d, self.units), d, self.units)
        self.params["bias"] = np.zeros(self.units)
        return (self.units,)

    def forward(self, x, mode, rng):
        return x @ self.params["weight"] + self.params["bias"], x

    def backward(self, d_out, cache):
        x = cache
        grads = {
            "weight": x.T @ d_out,
            "bias": d_out.sum(axis=0),
        }
        return grads, d_out @ self.params["weight"].T


class Conv2d(Layer):
    """2-D cross-correlation (no kernel flip), square kernel.

    The forward pass accumulates one (in-channel, ky, kx) tap at a time so
    each output element sums its terms in the same order as a naive
    six-nested-loop reference, making the two bitwise-comparable.
    """

    kind = "conv2d"

    def __init__(self, channels, kernel, stride=1, padding=0):
        super().__init__()
        for name, v, lo in (("channels", channels, 1), ("kernel", kernel, 1),
                            ("stride", stride, 1), ("padding", padding, 0)):
            if not isinstance(v, int) or v < lo:
                raise ConfigError(f"conv2d.{name}: must be an integer >= {lo}, got {v!r}")
        self.channels = channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding

    def _build(self, in_shape, rng):
        if len(in_shape) != 3:
            raise self._shape_error(
                f"expects image input of shape (channels, h, w), got {in_shape}"
            )
        c_in, h, w = in_shape
        k, s, p = self.kernel, self.stride, self.padding
        for dim, name in ((h, "height"), (w, "width")):
            span = dim + 2 * p - k
            if span < 0 or span % s != 0:
                raise self._shape_error(
                    f"output {name} (({dim} + 2*{p} - {k}) / {s} + 1) is not a positive integer"
                )
        h_out = (h + 2 * p - k) // s + 1
        w_out = (w + 2 * p - k) // s + 1
        fan_in = c_in * k * k
        fan_out = self.channels * k * k
        self.params["weight"] = _glorot_uniform(
            rng, (self.channels, c_in, k, k), fan_in, fan_out
        )
        self.params["bias"] = np.zeros(self.channels)
        return (self.channels, h_out, w_out)

    def _pad(self, x):
        p = self.padding
        if p == 0:
            return x
        return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))

    def forward(self, x, mode, rng):
        w = self.params["weight"]
        c_out, c_in, k, _ = w.shape
        s = self.stride
        _, h_out, w_out = self.out_shape
        xp = self._pad(x)
        out = np.zeros((x.shape[0], c_out, h_out, w_out))
        # Tap order (ci, ky, kx) fixed: it is the summation order contract.
        for ci in range(c_in):
            for ky in range(k):
                for kx in range(k):
                    patch = xp[:, ci, ky:ky + s * h_out:s, kx:kx + s * w_out:s]
                    out += w[None, :, ci, ky, kx, None, None] * patch[:, None, :, :]
        out += self.params["bias"][None, :, None, None]
        return out, xp

    def backward(self, d_out, cache):
        xp = cache
        w = self.params["weight"]
        _, c_in, k, _ = w.shape
        s, p = self.stride, self.padding
        _, h_out, w_out = self.out_shape

        d_w = np.zeros_like(w)
        d_xp = np.zeros_like(xp)
        for ky in range(k):
            for kx in range(k):
                patch = xp[:, :, ky:ky + s * h_out:s, kx:kx + s * w_out:s]
                d_w[:, :, ky, kx] = np.tensordot(d_out, patch, axes=([0, 2, 3], [0, 2, 3]))
                spread = np.tensordot(d_out, w[:, :, ky, kx], axes=([1], [0]))
                d_xp[:, :, ky:ky + s * h_out:s, kx:kx + s * w_out:s] += np.moveaxis(spread, 3, 1)
        grads = {"weight": d_w, "bias": d_out.sum(axis=(0, 2, 3))}
        if p:
            d_x = d_xp[:, :, p:-p, p:-p]
        else:
            d_x = d_xp
        return grads, d_x


class MaxPool2d(Layer):
    """Max pooling; ties resolved to the first maximum in row-major window order."""

    kind = "maxpool2d"

    def __init__(self, kernel, stride=None):
        super().__init__()
        if not isinstance(kernel, int) or kernel < 1:
            raise ConfigError(f"maxpool2d.kernel: must be a positive integer, got {kernel!r}")
        if stride is None:
            stride = kernel
        if not isinstance(stride, int) or stride < 1:
            raise ConfigError(f"maxpool2d.stride: must be a positive integer, got {stride!r}")
        self.kernel = kernel
        self.stride = stride

    def _build(self, in_shape, rng):
        if len(in_shape) != 3:
            raise self._shape_error(
                f"expects image input of shape (channels, h, w), got {in_shape}"
            )
        c, h, w = in_shape
        k, s = self.kernel, self.stride
        if h < k or w < k:
            raise self._shape_error(f"window {k}x{k} larger than input {h}x{w}")
        # Trailing rows/cols that do not fill a window are dropped.
        return (c, (h - k) // s + 1, (w - k) // s + 1)

    def forward(self, x, mode, rng):
        k, s = self.kernel, self.stride
        _, h_out, w_out = self.out_shape
        b, c = x.shape[:2]
        windows = np.empty((b, c, h_out, w_out, k * k))
        for ky in range(k):
            for kx in range(k):
                windows[..., ky * k + kx] = x[:, :, ky:ky + s * h_out:s, kx:kx + s * w_out:s]
        argmax = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
        return out, (argmax, x.shape)

    def backward(self, d_out, cache):
        argmax, in_shape = cache
        k, s = self.kernel, self.stride
        _, h_out, w_out = self.out_shape
        d_x = np.zeros(in_shape)
        for ky in range(k):
            for kx in range(k):
                hit = argmax == (ky * k + kx)
                d_x[:, :, ky:ky + s * h_out:s, kx:kx + s * w_out:s] += d_out * hit
        return {}, d_x


class ReLU(Layer):
    kind = "relu"

    def _build(self, in_shape, rng):
        return in_shape

    def forward(self, x, mode, rng):
        return np.maximum(x, 0.0), x > 0

    def backward(self, d_out, cache):
        return {}, d_out * cache


class Tanh(Layer):
    kind = "tanh"

    def _build(self, in_shape, rng):
        return in_shape

    def forward(self, x, mode, rng):
        y = np.tanh(x)
        return y, y

    def backward(self, d_out, cache):
        y = cache
        return {}, d_out * (1.0 - y * y)


class BatchNorm(Layer):
    """Batch normalization over features (2-D input) or channels (4-D input).

    Batch statistics use the biased variance. Running averages update as
    running = (1 - momentum) * running + momentum * batch, and only in
    ``train`` mode; ``simplify`` mode normalizes with batch statistics but
    leaves the running averages untouched.
    """

    kind = "batchnorm"

    def __init__(self, momentum=0.1, eps=1e-5):
        super().__init__()
        if not (0.0 < momentum < 1.0):
            raise ConfigError(f"batchnorm.momentum: must be in (0, 1), got {momentum!r}")
        if eps <= 0:
            raise ConfigError(f"batchnorm.eps: must be positive, got {eps!r}")
        self.momentum = momentum
        self.eps = eps
        self._axes: tuple[int, ...] = (0,)

    def _build(self, in_shape, rng):
        if len(in_shape) == 1:
            width = in_shape[0]
            self._axes = (0,)
        elif len(in_shape) == 3:
            width = in_shape[0]
            self._axes = (0, 2, 3)
        else:
            raise self._shape_error(f"expects (d,) or (channels, h, w) input, got {in_shape}")
        self.params["gamma"] = np.ones(width)
        self.params["beta"] = np.zeros(width)
        self.buffers["running_mean"] = np.zeros(width)
        self.buffers["running_var"] = np.ones(width)
        return in_shape

    def _view(self, v, ndim):
        if ndim == 4:
            return v.reshape(1, -1, 1, 1)
        return v

    def forward(self, x, mode, rng):
        nd = x.ndim
        gamma = self._view(self.params["gamma"], nd)
        beta = self._view(self.params["beta"], nd)
        if mode == MODE_EVAL:
            inv_std = 1.0 / np.sqrt(self.buffers["running_var"] + self.eps)
            x_hat = (x - self._view(self.buffers["running_mean"], nd)) * self._view(inv_std, nd)
            return gamma * x_hat + beta, ("eval", x_hat, inv_std)
        mean = x.mean(axis=self._axes)
        var = x.var(axis=self._axes)
        if mode == MODE_TRAIN:
            m = self.momentum
            self.buffers["running_mean"] *= 1.0 - m
            self.buffers["running_mean"] += m * mean
            self.buffers["running_var"] *= 1.0 - m
            self.buffers["running_var"] += m * var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - self._view(mean, nd)) * self._view(inv_std, nd)
        return gamma * x_hat + beta, ("batch", x_hat, inv_std)

    def backward(self, d_out, cache):
        stats, x_hat, inv_std = cache
        nd = d_out.ndim
        axes = self._axes if nd == 4 else (0,)
        grads = {
            "gamma": (d_out * x_hat).sum(axis=axes),
            "beta": d_out.sum(axis=axes),
        }
        gamma_v = self._view(self.params["gamma"], nd)
        d_hat = d_out * gamma_v
        inv_std_v = self._view(inv_std, nd)
        if stats == "eval":
            # Running statistics are constants, so the map is affine.
            return grads, d_hat * inv_std_v
        count = np.prod([d_out.shape[a] for a in axes])
        d_x = (inv_std_v / count) * (
            count * d_hat
            - d_hat.sum(axis=axes, keepdims=True)
            - x_hat * (d_hat * x_hat).sum(axis=axes, keepdims=True)
        )
        return grads, d_x


class Dropout(Layer):
    """Inverted dropout: train scales kept units by 1/(1-p), other modes are identity."""

    kind = "dropout"

    def __init__(self, p):
        super().__init__()
        if not isinstance(p, (int, float)) or not (0.0 <= p < 1.0):
            raise ConfigError(f"dropout.p: must be in [0, 1), got {p!r}")
        self.p = float(p)

    def _build(self, in_shape, rng):
        return in_shape

    def forward(self, x, mode, rng):
        if mode != MODE_TRAIN or self.p == 0.0:
            return x, None
        scale = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * scale, scale

    def backward(self, d_out, cache):
        if cache is None:
            return {}, d_out
        return {}, d_out * cache


class Flatten(Layer):
    kind = "flatten"

    def _build(self, in_shape, rng):
        return (int(np.prod(in_shape)),)

    def forward(self, x, mode, rng):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, d_out, cache):
        return {}, d_out.reshape(cache)
