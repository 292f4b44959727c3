"""Training strategies and the developmental plan.

Three strategies share one outer loop:

* CT (classic training): plain mini-batch updates on the raw data.
* FT (friendly training): before each weight update, an inner loop of
  ``tau`` gradient-descent steps perturbs the batch inputs to lower the
  loss, with the per-iteration budget ``tau`` decaying to zero under a
  quadratic plan. The weights are frozen while the inputs move; only the
  perturbed batch feeds the weight update.
* EEF (easy examples first): keeps only the k lowest-loss examples of
  each batch, with k growing from 1 to the batch size under the mirrored
  quadratic plan.

The inner loop owns a perturbation matrix ``delta`` with one row per
example, reset to zeros at every outer iteration. Rows whose example is
already classified correctly with softmax confidence at or above the
threshold ``c`` are frozen for that step (their gradient rows are
zeroed), so confident examples are never altered.

Degenerate corners are exact: FT with ``tau1 == 0`` takes the same code
path as CT, and EEF with a full batch keep (including batch size 1)
skips selection entirely, so those trajectories are bitwise identical
to CT under shared seeds.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, batch_iter
from .errors import ConfigError, InputError, NumericFailure
from .evaluation import RunRecord, error_rate
from .nn.architectures import build_network, load_descriptor
from .nn.layers import MODE_EVAL, MODE_SIMPLIFY, MODE_TRAIN
from .nn.losses import cross_entropy, per_example_cross_entropy, softmax
from .optim import Adam, AdamSettings, delta_step

STRATEGIES = ("CT", "FT", "EEF")


# ----- plans and masks -------------------------------------------------------


def _plan_fraction(gamma: int, gamma_max_simp: int) -> float:
    if gamma < 1:
        raise InputError(f"gamma must be at least 1, got {gamma}")
    if gamma_max_simp < 1:
        raise InputError(f"gamma_max_simp must be at least 1, got {gamma_max_simp}")
    return max(1.0 - (gamma - 1) / gamma_max_simp, 0.0)


def plan_tau(gamma: int, tau1: int, gamma_max_simp: int) -> int:
    """Inner-step budget at outer iteration gamma.

    Quadratic decay from tau1 to zero: floor(tau1 * max(1 - (gamma-1) /
    gamma_max_simp, 0)^2). Zero for every gamma past the horizon.
    """
    if tau1 < 0:
        raise InputError(f"tau1 must be non-negative, got {tau1}")
    frac = _plan_fraction(gamma, gamma_max_simp)
    return int(math.floor(tau1 * frac * frac))


def plan_k(gamma: int, batch_size: int, gamma_max_simp: int) -> int:
    """Examples kept per batch under the mirrored quadratic plan.

    Starts at 1, grows to the full batch at the horizon: the keep count
    is 1 + floor((b-1) * (1 - plan_fraction^2)), capped at b.
    """
    if batch_size < 1:
        raise InputError(f"batch_size must be at least 1, got {batch_size}")
    frac = _plan_fraction(gamma, gamma_max_simp)
    grown = 1 + int(math.floor((batch_size - 1) * (1.0 - frac * frac)))
    return min(batch_size, grown)


def confidence_mask(logits, labels, c: float):
    """True where the example is already confidently correct.

    Entry i is true iff argmax(logits[i]) == labels[i] AND the softmax
    probability of the true class is at least c.
    """
    if not (0.0 < c <= 1.0):
        raise InputError(f"confidence threshold must be in (0, 1], got {c}")
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    probs = softmax(logits)
    pred = logits.argmax(axis=1)
    true_prob = probs[np.arange(logits.shape[0]), labels]
    return (pred == labels) & (true_prob >= c)


# ----- inner loop ------------------------------------------------------------


def simplify_batch(net, batch_x, labels, tau_gamma: int, eta: float, c: float):
    """Perturb a batch toward lower loss with the weights frozen.

    Runs ``tau_gamma`` gradient-descent steps on a perturbation matrix
    ``delta`` (reset to zeros here, at the start of the outer iteration).
    Each step forwards ``x + delta`` in simplify mode, re-evaluates the
    confidence mask, freezes the confident rows, and descends on the
    rest. Returns ``(x_tilde, delta, frozen_fraction)`` where
    ``frozen_fraction`` is the frozen share at the last step.

    Rows never unfrozen are returned as bitwise copies of the input, so
    a fully confident batch yields ``x_tilde == x`` exactly.
    """
    if tau_gamma < 0:
        raise InputError(f"tau_gamma must be non-negative, got {tau_gamma}")
    x = np.asarray(batch_x, dtype=np.float64)
    if tau_gamma == 0:
        return x.copy(), np.zeros_like(x), 0.0

    delta = np.zeros_like(x)
    touched = np.zeros(x.shape[0], dtype=bool)
    frozen_fraction = 0.0
    for step in range(1, tau_gamma + 1):
        logits, cache = net.forward(x + delta, MODE_SIMPLIFY)
        _, grad_logits = cross_entropy(logits, labels)
        _, input_grad = net.backward(cache, grad_logits)
        freeze = confidence_mask(logits, labels, c)
        frozen_fraction = float(freeze.mean())
        delta = delta_step(delta, input_grad, eta, freeze_mask=freeze)
        touched |= ~freeze
        if not np.isfinite(delta).all():
            raise NumericFailure(
                f"perturbation became non-finite at inner step {step} of {tau_gamma}"
            )
    x_tilde = x.copy()
    if touched.any():
        x_tilde[touched] = x[touched] + delta[touched]
    return x_tilde, delta, frozen_fraction


# ----- per-iteration steps ---------------------------------------------------


def _update_step(net, adam, x, labels) -> float:
    """One weight update: train-mode forward/backward plus an Adam step."""
    logits, cache = net.forward(x, MODE_TRAIN)
    loss, grad_logits = cross_entropy(logits, labels)
    grads, _ = net.backward(cache, grad_logits)
    adam.step(grads)
    return loss


def ct_step(net, adam, batch_x, labels, gamma: int):
    """Classic training: update on the raw batch."""
    loss = _update_step(net, adam, batch_x, labels)
    return {"gamma": gamma, "tau": 0, "frozen_fraction": 0.0, "loss": loss}


def ft_step(net, adam, batch_x, labels, gamma: int, tau1: int, gamma_max_simp: int,
            eta: float, c: float, capture: bool = False):
    """Friendly training: simplify the batch, then update on the result.

    With a zero budget (tau1 == 0 or gamma past the horizon) the inner
    loop is skipped entirely and the step is identical to ``ct_step``.
    """
    tau = plan_tau(gamma, tau1, gamma_max_simp)
    if tau > 0:
        x_used, delta, frozen = simplify_batch(net, batch_x, labels, tau, eta, c)
    else:
        x_used, delta, frozen = batch_x, None, 0.0
    loss = _update_step(net, adam, x_used, labels)
    metrics = {"gamma": gamma, "tau": tau, "frozen_fraction": frozen, "loss": loss}
    if capture:
        x = np.asarray(batch_x, dtype=np.float64)
        metrics["x"] = x.copy()
        metrics["delta"] = np.zeros_like(x) if delta is None else delta
        metrics["x_tilde"] = x.copy() if delta is None else x_used
    return metrics


def eef_step(net, adam, batch_x, labels, gamma: int, gamma_max_simp: int):
    """Easy examples first: keep the k lowest-loss examples, then update.

    Losses come from an eval-mode pass on the raw batch before the
    update. Ties break toward the lower original index, and the kept
    examples stay in their original batch order, so a full keep is
    bitwise identical to ``ct_step``.
    """
    b = len(labels)
    k = plan_k(gamma, b, gamma_max_simp)
    if k < b:
        logits, _ = net.forward(batch_x, MODE_EVAL)
        losses = per_example_cross_entropy(logits, labels)
        keep = np.sort(np.argsort(losses, kind="stable")[:k])
        batch_x = batch_x[keep]
        labels = labels[keep]
        dropped = (b - k) / b
    else:
        dropped = 0.0
    loss = _update_step(net, adam, batch_x, labels)
    return {"gamma": gamma, "tau": 0, "frozen_fraction": dropped, "loss": loss}


# ----- outer loop ------------------------------------------------------------


@dataclass(frozen=True)
class TrainerConfig:
    """Everything a training run needs besides the data splits."""

    architecture: object  # preset name, descriptor path, or parsed descriptor
    strategy: str = "FT"
    epochs: int = 20
    batch_size: int = 32
    eta: float = 0.1
    tau1: int = 0
    confidence: float = 0.95
    gamma_max_simp_fraction: float = 0.5
    adam: AdamSettings = field(default_factory=AdamSettings)
    seed: int = 0
    trace: bool = False
    record_seconds: bool = True
    dump_epochs: tuple[int, ...] = ()

    def validate(self) -> "TrainerConfig":
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"strategy: must be one of {', '.join(STRATEGIES)}, got {self.strategy!r}"
            )
        if not isinstance(self.epochs, int) or self.epochs < 0:
            raise ConfigError(f"epochs: must be a non-negative integer, got {self.epochs!r}")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ConfigError(f"batch_size: must be a positive integer, got {self.batch_size!r}")
        if not isinstance(self.tau1, int) or self.tau1 < 0:
            raise ConfigError(f"tau1: must be a non-negative integer, got {self.tau1!r}")
        if not (isinstance(self.eta, (int, float)) and self.eta > 0):
            raise ConfigError(f"eta: must be positive, got {self.eta!r}")
        if not (isinstance(self.confidence, (int, float)) and 0.0 < self.confidence <= 1.0):
            raise ConfigError(f"confidence: must be in (0, 1], got {self.confidence!r}")
        f = self.gamma_max_simp_fraction
        if not (isinstance(f, (int, float)) and 0.0 < f < 1.0):
            raise ConfigError(f"gamma_max_simp_fraction: must be in (0, 1), got {f!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed: must be a non-negative integer, got {self.seed!r}")
        self.adam.validate()
        load_descriptor(self.architecture)  # raises ConfigError on bad layers
        return self


@dataclass
class TrainResult:
    network: object
    history: list
    trace: list | None
    gamma_max: int
    gamma_max_simp: int
    best_epoch: int | None  # 1-based epoch of the lowest validation error
    best_params: dict | None
    best_buffers: dict | None
    perturbation_dumps: dict  # 1-based epoch -> (x, delta, x_tilde) of its first batch


def resolve_horizon(gamma_max: int, fraction: float) -> int:
    """Integer plan horizon from the configured fraction of gamma_max."""
    return max(1, int(fraction * gamma_max))


def train(splits, cfg: TrainerConfig, on_epoch=None, on_iteration=None) -> TrainResult:
    """Run one training experiment; returns the model and its history.

    ``splits`` maps "train"/"val"/"test" to Datasets (missing splits fall
    back to the train split for error reporting). The iteration counter
    gamma runs from 1 to epochs * ceil(n / batch_size); the plan horizon
    is ``gamma_max_simp_fraction`` of that, resolved to an integer.

    ``on_iteration(gamma, net, metrics)`` fires after every weight
    update, ``on_epoch(record, net)`` after every epoch's evaluation.
    Both see the live network. A numeric failure mid-run propagates after
    the history recorded so far is preserved by the caller.
    """
    cfg.validate()
    train_ds: Dataset = splits["train"]
    val_ds: Dataset = splits.get("val", train_ds)
    test_ds: Dataset = splits.get("test", val_ds)

    net = build_network(
        cfg.architecture, train_ds.input_shape(), train_ds.class_count, seed=cfg.seed
    )
    adam = Adam(net.parameters(), cfg.adam)
    batches_per_epoch = math.ceil(train_ds.n / cfg.batch_size)
    gamma_max = cfg.epochs * batches_per_epoch
    gamma_max_simp = resolve_horizon(gamma_max, cfg.gamma_max_simp_fraction) if gamma_max else 1

    history: list[RunRecord] = []
    trace: list | None = [] if cfg.trace else None
    dumps: dict = {}
    best_epoch = None
    best_val = None
    best_params = None
    best_buffers = None
    gamma = 0

    for epoch_idx in range(cfg.epochs):
        epoch = epoch_idx + 1
        started = time.perf_counter()
        taus = []
        first_batch = True
        for x, y in batch_iter(train_ds, cfg.batch_size, epoch_idx, cfg.seed):
            gamma += 1
            if cfg.strategy == "CT":
                metrics = ct_step(net, adam, x, y, gamma)
            elif cfg.strategy == "FT":
                capture = first_batch and epoch in cfg.dump_epochs
                metrics = ft_step(
                    net, adam, x, y, gamma,
                    cfg.tau1, gamma_max_simp, cfg.eta, cfg.confidence,
                    capture=capture,
                )
                if capture:
                    dumps[epoch] = (metrics["x"], metrics["delta"], metrics["x_tilde"])
            else:
                metrics = eef_step(net, adam, x, y, gamma, gamma_max_simp)
            taus.append(metrics["tau"])
            if trace is not None:
                trace.append(
                    (metrics["gamma"], metrics["tau"], metrics["frozen_fraction"],
                     metrics["loss"])
                )
            if on_iteration is not None:
                on_iteration(gamma, net, metrics)
            first_batch = False

        record = RunRecord(
            epoch=epoch,
            train_err=error_rate(net, train_ds),
            val_err=error_rate(net, val_ds),
            test_err=error_rate(net, test_ds),
            mean_tau=float(np.mean(taus)) if taus else 0.0,
            seconds=(time.perf_counter() - started) if cfg.record_seconds else 0.0,
        )
        history.append(record)
        if best_val is None or record.val_err < best_val:
            best_val = record.val_err
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in net.parameters().items()}
            best_buffers = {k: v.copy() for k, v in net.buffers().items()}
        if on_epoch is not None:
            on_epoch(record, net)

    return TrainResult(
        network=net,
        history=history,
        trace=trace,
        gamma_max=gamma_max,
        gamma_max_simp=gamma_max_simp,
        best_epoch=best_epoch,
        best_params=best_params,
        best_buffers=best_buffers,
        perturbation_dumps=dumps,
    )
