"""Datasets: the two-moons synthesizer, `.amat` text files, batching.

Features always live in a flat (n, d) float64 matrix. Image data keeps
its geometry in ``image_shape`` so networks with convolutions can fold
the rows back into (channels, h, w); everything else in the package can
stay agnostic and treat examples as d-dimensional vectors.

`.amat` is the plain-text format used by the MNIST-variations archives:
one example per line, whitespace-separated decimals, d feature values
followed by one label token (labels may be float-encoded, e.g. "7.0").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError, ParseError, ShapeError


@dataclass(frozen=True)
class Dataset:
    """Immutable supervised dataset: flat features, integer labels."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    image_shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        l = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", l)
        if f.ndim != 2:
            raise ShapeError(f"features must be 2-D (n, d), got shape {f.shape}")
        if l.shape != (f.shape[0],):
            raise ShapeError(f"labels shape {l.shape} does not match {f.shape[0]} examples")
        if self.class_count < 2:
            raise InputError(f"class_count must be at least 2, got {self.class_count}")
        if l.size and (l.min() < 0 or l.max() >= self.class_count):
            raise InputError(
                f"labels must lie in [0, {self.class_count}), found {l.min()}..{l.max()}"
            )
        if self.image_shape is not None:
            shape = tuple(int(s) for s in self.image_shape)
            object.__setattr__(self, "image_shape", shape)
            if int(np.prod(shape)) != f.shape[1]:
                raise ShapeError(
                    f"image_shape {shape} implies {int(np.prod(shape))} features, "
                    f"data has {f.shape[1]}"
                )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return replace(self, features=self.features[indices], labels=self.labels[indices])

    def input_shape(self) -> tuple[int, ...]:
        return self.image_shape if self.image_shape is not None else (self.feature_count,)


def two_moons(n: int, noise_std: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaving half-circles with Gaussian noise, labels 0 and 1.

    Class 0 is the upper half of the unit circle centered at the origin;
    class 1 is the opposing half-circle offset so the arms interleave
    (the de-facto standard generator geometry). ceil(n/2) points go to
    class 0, floor(n/2) to class 1.
    """
    if n < 2:
        raise InputError(f"two_moons needs n >= 2, got {n}")
    if noise_std < 0:
        raise InputError(f"noise_std must be non-negative, got {noise_std}")
    n0 = (n + 1) // 2
    n1 = n // 2
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    pts = np.empty((n, 2))
    pts[:n0, 0] = np.cos(t0)
    pts[:n0, 1] = np.sin(t0)
    pts[n0:, 0] = 1.0 - np.cos(t1)
    pts[n0:, 1] = 0.5 - np.sin(t1)
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        pts = pts + rng.normal(0.0, noise_std, size=pts.shape)
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return Dataset(features=pts, labels=labels, class_count=2)


def load_amat(path, feature_count: int | None = None, class_count: int | None = None,
              image_shape=None) -> Dataset:
    """Parse an `.amat` text file into a Dataset.

    ``feature_count`` fixes d; when omitted it is inferred from the first
    line (all tokens but the last). Labels are parsed as floats and
    truncated to integers, accepting the float-encoded labels the
    distribution files use.
    """
    rows = []
    labels = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if feature_count is None:
                feature_count = len(tokens) - 1
                if feature_count < 1:
                    raise ParseError(f"{path}:{lineno}: need at least 2 tokens per line")
            if len(tokens) != feature_count + 1:
                raise ParseError(
                    f"{path}:{lineno}: expected {feature_count + 1} tokens "
                    f"({feature_count} features + label), found {len(tokens)}"
                )
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric token") from None
            rows.append(values[:-1])
            labels.append(int(values[-1]))
    if not rows:
        raise ParseError(f"{path}: file contains no examples")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0:
        raise ParseError(f"{path}: negative label {labels.min()}")
    if class_count is None:
        class_count = max(int(labels.max()) + 1, 2)
    return Dataset(
        features=np.asarray(rows, dtype=np.float64),
        labels=labels,
        class_count=class_count,
        image_shape=tuple(image_shape) if image_shape else None,
    )


def render_amat(dataset: Dataset) -> str:
    """Render a Dataset in `.amat` text form (round-trips exactly)."""
    lines = []
    for row, label in zip(dataset.features, dataset.labels):
        lines.append(" ".join(repr(float(v)) for v in row) + f" {int(label)}")
    return "\n".join(lines) + "\n"


def write_amat(dataset: Dataset, path):
    """Write a Dataset in `.amat` text form (round-trips exactly)."""
    with open(path, "w", newline="\n") as fh:
        fh.write(render_amat(dataset))


def batch_indices(n: int, batch_size: int, epoch: int, seed: int) -> list[np.ndarray]:
    """Seeded epoch-wise shuffle of range(n), chunked into ceil(n/b) batches.

    The permutation is drawn from ``seed XOR epoch`` so each epoch gets a
    different cover of the data while the whole schedule stays a pure
    function of (seed, epoch). Batches partition the index range.
    """
    if batch_size < 1:
        raise InputError(f"batch_size must be at least 1, got {batch_size}")
    if n < 1:
        raise InputError(f"need at least one example, got n={n}")
    perm = np.random.default_rng(seed ^ epoch).permutation(n)
    count = math.ceil(n / batch_size)
    return [perm[i * batch_size:(i + 1) * batch_size] for i in range(count)]


def batch_iter(dataset: Dataset, batch_size: int, epoch: int, seed: int):
    """Yield (features, labels) mini-batches for one epoch."""
    for idx in batch_indices(dataset.n, batch_size, epoch, seed):
        yield dataset.features[idx], dataset.labels[idx]


def split_dataset(dataset: Dataset, fraction: float, seed: int):
    """Split off a seeded random ``fraction`` of the examples.

    Returns (rest, held_out); the held-out part gets at least one example
    when 0 < fraction < 1.
    """
    if not (0.0 < fraction < 1.0):
        raise InputError(f"split fraction must be in (0, 1), got {fraction}")
    hold = max(1, int(round(dataset.n * fraction)))
    if hold >= dataset.n:
        raise InputError(
            f"split fraction {fraction} leaves no training data (n={dataset.n})"
        )
    perm = np.random.default_rng(seed).permutation(dataset.n)
    return dataset.subset(np.sort(perm[hold:])), dataset.subset(np.sort(perm[:hold]))
