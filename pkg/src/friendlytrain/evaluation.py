"""Evaluation: error rates, run histories, model selection, snapshots.

All CSV output is written atomically (temp file in the target directory,
then rename) with fixed newlines and shortest round-trip float formatting,
so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ShapeError
from .data import Dataset
from .nn.architectures import build_network
from .nn.layers import MODE_EVAL
from .nn.network import Network

HISTORY_HEADER = "epoch,train_err,val_err,test_err,mean_tau,seconds"
SUMMARY_HEADER = "strategy,seed,best_epoch,test_err"
TRACE_HEADER = "gamma,tau,frozen_fraction,batch_loss"


@dataclass(frozen=True)
class RunRecord:
    """Per-epoch record of a training run."""

    epoch: int
    train_err: float
    val_err: float
    test_err: float
    mean_tau: float
    seconds: float


def error_rate(net: Network, dataset: Dataset, batch_size: int = 512) -> float:
    """Fraction of examples whose argmax logit differs from the label.

    Runs in eval mode over the full dataset; argmax ties resolve to the
    lowest class index, so the result is deterministic.
    """
    if net.class_count != dataset.class_count:
        raise InputError(
            f"model has {net.class_count} classes, dataset has {dataset.class_count}"
        )
    wrong = 0
    for start in range(0, dataset.n, batch_size):
        stop = min(start + batch_size, dataset.n)
        logits, _ = net.forward(dataset.features[start:stop], MODE_EVAL)
        pred = logits.argmax(axis=1)
        wrong += int((pred != dataset.labels[start:stop]).sum())
    return wrong / dataset.n


def select_best(history) -> int:
    """Index of the record with the lowest validation error, earliest wins ties."""
    history = list(history)
    if not history:
        raise InputError("select_best needs a non-empty history")
    best = 0
    for i, rec in enumerate(history):
        if rec.val_err < history[best].val_err:
            best = i
    return best


@dataclass(frozen=True)
class RepeatSummary:
    """Aggregate of one experiment repeated across seeds."""

    seeds: tuple[int, ...]
    test_errors: tuple[float, ...]
    best_epochs: tuple[int, ...]
    mean: float
    std: float  # population standard deviation (divide by the seed count)


def seeded_repeat(run_fn, seeds) -> RepeatSummary:
    """Run ``run_fn(seed) -> (best_epoch, test_err)`` per seed and aggregate.

    The reported spread is the population standard deviation.
    """
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise InputError("seeded_repeat needs at least one seed")
    best_epochs = []
    errors = []
    for seed in seeds:
        best_epoch, test_err = run_fn(seed)
        best_epochs.append(int(best_epoch))
        errors.append(float(test_err))
    arr = np.asarray(errors)
    return RepeatSummary(
        seeds=seeds,
        test_errors=tuple(errors),
        best_epochs=tuple(best_epochs),
        mean=float(arr.mean()),
        std=float(arr.std(ddof=0)),
    )


# ----- snapshots -------------------------------------------------------------


def save_snapshot(net: Network, descriptor_layers, epoch: int, path):
    """Persist parameters, buffers, and the architecture next to an epoch tag."""
    meta = {
        "layers": descriptor_layers,
        "input_shape": list(net.input_shape),
        "class_count": net.class_count,
        "seed": net.seed,
        "epoch": int(epoch),
    }
    arrays = {f"param/{k}": v for k, v in net.parameters().items()}
    arrays.update({f"buffer/{k}": v for k, v in net.buffers().items()})
    arrays["meta_json"] = np.array(json.dumps(meta))
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_snapshot(path):
    """Rebuild the network saved by ``save_snapshot``; returns (net, epoch)."""
    with np.load(path) as bundle:
        if "meta_json" not in bundle:
            raise ShapeError(f"{path}: not a model snapshot (missing meta_json)")
        meta = json.loads(str(bundle["meta_json"].item()))
        params = {k[len("param/"):]: bundle[k] for k in bundle.files if k.startswith("param/")}
        buffers = {k[len("buffer/"):]: bundle[k] for k in bundle.files if k.startswith("buffer/")}
    net = build_network(
        {"layers": meta["layers"]},
        tuple(meta["input_shape"]),
        meta["class_count"],
        seed=meta["seed"],
    )
    net.load_parameters(params)
    if buffers:
        net.load_buffers(buffers)
    return net, meta["epoch"]


# ----- CSV output ------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_text_atomic(path, text: str):
    """Write a whole file atomically: temp file in place, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(header: str, rows) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_history_csv(history, path):
    rows = [
        (r.epoch, r.train_err, r.val_err, r.test_err, r.mean_tau, r.seconds)
        for r in history
    ]
    write_text_atomic(path, render_csv(HISTORY_HEADER, rows))


def write_summary_csv(rows, path):
    """Rows of (strategy, seed, best_epoch, test_err)."""
    write_text_atomic(path, render_csv(SUMMARY_HEADER, rows))


def write_trace_csv(rows, path):
    """Rows of (gamma, tau, frozen_fraction, batch_loss)."""
    write_text_atomic(path, render_csv(TRACE_HEADER, rows))
