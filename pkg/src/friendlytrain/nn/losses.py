"""Cross-entropy loss with softmax, numerically stable via max-shift."""

from __future__ import annotations

import numpy as np

from ..errors import InputError, ShapeError


def _check(logits, labels):
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be 2-D (batch, classes), got shape {logits.shape}")
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],):
        raise ShapeError(
            f"labels shape {labels.shape} does not match batch size {logits.shape[0]}"
        )
    labels = labels.astype(np.int64)
    c = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        bad = labels[(labels < 0) | (labels >= c)][0]
        raise InputError(f"label {bad} out of range [0, {c})")
    return logits, labels


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def per_example_cross_entropy(logits, labels):
    """Vector of -log softmax(logits)[label], one entry per example."""
    logits, labels = _check(logits, labels)
    ls = log_softmax(logits)
    return -ls[np.arange(logits.shape[0]), labels]


def cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient in the logits.

    Returns ``(loss, grad_logits)`` with
    ``grad_logits[i] = (softmax(logits[i]) - onehot(labels[i])) / b``,
    so each gradient row sums to zero.
    """
    logits, labels = _check(logits, labels)
    b = logits.shape[0]
    if b == 0:
        raise ShapeError("cross_entropy needs at least one example")
    losses = per_example_cross_entropy(logits, labels)
    grad = softmax(logits)
    grad[np.arange(b), labels] -= 1.0
    grad /= b
    return float(losses.mean()), grad
