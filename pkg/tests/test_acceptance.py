"""Acceptance checks: the must-hold guarantees of the package, end to end.

Each test is one criterion and prints exactly one [PASS]/[FAIL] line with
the measured numbers (visible with ``pytest -rA`` or on failure). The
final smoke check trains two full convolutional models and takes a few
minutes; every other check finishes in seconds.

The smoke check prefers real mnist-back-image files if they are placed
under ``data/mnist-back-image/`` (any ``*train*.amat`` / ``*test*.amat``
pair); otherwise it falls back to the bundled stand-in built from
scikit-learn sample data (see ``standins.py``).
"""

import json
import math
import time
from pathlib import Path

import numpy as np

from friendlytrain.cli import main
from friendlytrain.curriculum import (
    TrainerConfig,
    confidence_mask,
    plan_k,
    plan_tau,
    simplify_batch,
    train,
)
from friendlytrain.data import Dataset, load_amat, two_moons
from friendlytrain.errors import ConfigError, InputError
from friendlytrain.nn.architectures import build_network
from friendlytrain.nn.gradcheck import GRAD_TOL, layer_report, preset_report
from friendlytrain.nn.layers import MODE_EVAL, MODE_SIMPLIFY
from friendlytrain.nn.losses import cross_entropy
from friendlytrain.optim import AdamSettings

from standins import build_standin


def report(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    assert ok, line


def test_gradients_match_finite_differences_everywhere():
    t0 = time.monotonic()
    layer_errs = layer_report(seed=0, epsilon=1e-5)
    preset_errs = preset_report(
        seed=0, epsilon=1e-5, presets=("fc-a", "cnn-a-small", "toy-moons")
    )
    elapsed = time.monotonic() - t0
    expected_kinds = {"linear", "conv2d", "maxpool2d", "relu", "tanh",
                      "batchnorm", "dropout", "flatten"}
    worst = max({**layer_errs, **preset_errs}.values())
    ok = (set(layer_errs) == expected_kinds
          and worst < GRAD_TOL
          and elapsed < 60)
    report(
        "gradient correctness",
        ok,
        f"worst rel err {worst:.2e} over {len(layer_errs)} layer kinds and "
        f"{len(preset_errs)} presets (tol {GRAD_TOL:g}); {elapsed:.1f}s (cap 60)",
    )


def _tau_oracle(gamma, tau1, gms):
    frac = max(1.0 - (gamma - 1) / gms, 0.0)
    return math.floor(tau1 * frac * frac)


def _k_oracle(gamma, b, gms):
    frac = max(1.0 - (gamma - 1) / gms, 0.0)
    return min(b, 1 + math.floor((b - 1) * (1.0 - frac * frac)))


def test_decay_plans_match_closed_forms():
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1000):
        gms = int(rng.integers(1, 5000))
        gamma = int(rng.integers(1, 2 * gms + 10))
        tau1 = int(rng.integers(0, 200))
        b = int(rng.integers(1, 512))
        if plan_tau(gamma, tau1, gms) != _tau_oracle(gamma, tau1, gms):
            mismatches += 1
        if plan_k(gamma, b, gms) != _k_oracle(gamma, b, gms):
            mismatches += 1

    taus = [plan_tau(g, 120, 1000) for g in range(1, 1101)]
    ks = [plan_k(g, 32, 1000) for g in range(1, 1101)]
    anchors = (
        plan_tau(501, 120, 1000) == 30
        and plan_tau(1, 120, 1000) == 120
        and plan_tau(1001, 120, 1000) == 0
        and plan_k(501, 32, 1000) == 24
        and plan_k(1, 32, 1000) == 1
        and plan_k(21, 8, 100) == 3
        and plan_k(101, 8, 100) == 8
    )
    shape = (
        all(a >= b_ for a, b_ in zip(taus, taus[1:]))
        and all(a <= b_ for a, b_ in zip(ks, ks[1:]))
        and taus[1000] == 0          # gamma = 1001, past the horizon
        and all(k == 32 for k in ks[1000:])
    )
    ok = mismatches == 0 and anchors and shape
    report(
        "decay plans",
        ok,
        f"{mismatches}/2000 closed-form mismatches over 1000 random "
        f"(gamma, horizon) draws; anchors {'held' if anchors else 'broken'}; "
        f"monotone decay/growth {'held' if shape else 'broken'}",
    )


def test_zero_budget_strategies_coincide_bitwise():
    t0 = time.monotonic()
    splits = {"train": two_moons(200, 0.1, 5)}

    def run(strategy, tau1):
        cfg = TrainerConfig(
            architecture="toy-moons", strategy=strategy, epochs=1, batch_size=1,
            eta=0.5, tau1=tau1, confidence=0.95, gamma_max_simp_fraction=0.5,
            adam=AdamSettings(), seed=3, record_seconds=False,
        )
        return train(splits, cfg)

    ct = run("CT", 0)
    ft = run("FT", 0)
    eef = run("EEF", 0)
    elapsed = time.monotonic() - t0
    fp = ct.network.fingerprint()
    ok = (ct.gamma_max == 200
          and ft.network.fingerprint() == fp
          and eef.network.fingerprint() == fp
          and ft.history == ct.history
          and eef.history == ct.history
          and elapsed < 10)
    report(
        "degenerate equivalence",
        ok,
        f"CT, zero-budget FT, and batch-1 EEF agree bitwise over "
        f"{ct.gamma_max} iterations (weights and history); {elapsed:.1f}s (cap 10)",
    )


def test_confident_examples_are_never_perturbed():
    net = build_network(
        {"layers": [{"kind": "linear", "units": None}]}, (2,), 2, seed=0
    )
    net.load_parameters({
        "0.weight": np.array([[8.0, -8.0], [-8.0, 8.0]]),
        "0.bias": np.zeros(2),
    })
    x = np.array([[1.0, 0.0], [0.0, 1.0], [0.01, 0.0]])
    y = np.array([0, 1, 0])

    x_all, _, frozen_all = simplify_batch(net, x[:2], y[:2], 5, 0.5, 0.5)
    all_frozen = (x_all.tobytes() == x[:2].tobytes()) and frozen_all == 1.0

    x_mix, _, _ = simplify_batch(net, x, y, 5, 0.5, 0.9)
    confident_rows_untouched = x_mix[:2].tobytes() == x[:2].tobytes()
    uncertain_row_moved = not np.array_equal(x_mix[2], x[2])

    logits, _ = net.forward(x, MODE_EVAL)
    top_threshold_freezes_nothing = not confidence_mask(logits, y, 1.0).any()
    try:
        confidence_mask(logits, y, 1.5)
        bad_threshold_rejected = False
    except InputError:
        bad_threshold_rejected = True
    try:
        TrainerConfig(architecture="toy-moons", confidence=0.0).validate()
        bad_config_rejected = False
    except ConfigError:
        bad_config_rejected = True

    ok = (all_frozen and confident_rows_untouched and uncertain_row_moved
          and top_threshold_freezes_nothing and bad_threshold_rejected
          and bad_config_rejected)
    report(
        "confidence early stop",
        ok,
        "confidently-correct rows bitwise untouched across 5 inner steps; "
        "uncertain row moved; thresholds outside (0, 1] rejected",
    )


def test_single_inner_step_is_plain_gradient_descent_on_the_input():
    t0 = time.monotonic()
    ds = two_moons(16, 0.1, 4)
    net = build_network("toy-moons", (2,), 2, seed=4)
    x, y = ds.features, ds.labels
    eta = 0.3

    x_tilde, _, frozen = simplify_batch(net, x, y, 1, eta, 1.0)

    def loss_at(xp):
        logits, _ = net.forward(xp, MODE_SIMPLIFY)
        loss, _ = cross_entropy(logits, y)
        return loss

    eps = 1e-6
    fd = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        bumped = x.copy()
        bumped[idx] += eps
        up = loss_at(bumped)
        bumped[idx] -= 2 * eps
        down = loss_at(bumped)
        fd[idx] = (up - down) / (2 * eps)
    expected = x - eta * fd
    rel = np.abs(x_tilde - expected) / np.maximum(
        1.0, np.abs(x_tilde) + np.abs(expected)
    )
    elapsed = time.monotonic() - t0
    ok = rel.max() < 1e-4 and frozen == 0.0 and elapsed < 5
    report(
        "single inner step",
        ok,
        f"one perturbation step equals x - eta*dL/dx against central "
        f"differences, worst rel err {rel.max():.2e} (tol 1e-4); "
        f"{elapsed:.1f}s (cap 5)",
    )


def test_both_strategies_master_two_moons_while_training_differently():
    t0 = time.monotonic()
    splits = {"train": two_moons(800, 0.1, 11)}
    final = {}
    mid_fp = {}
    for strategy, tau1 in (("CT", 0), ("FT", 10)):
        for seed in (0, 1, 2):
            snap = {}

            def on_it(gamma, net, metrics):
                if gamma == 300:
                    snap["fp"] = net.fingerprint()

            cfg = TrainerConfig(
                architecture="toy-moons", strategy=strategy, epochs=20,
                batch_size=16, eta=0.1, tau1=tau1, confidence=0.95,
                gamma_max_simp_fraction=0.25, adam=AdamSettings(alpha=0.01),
                seed=seed, record_seconds=False,
            )
            result = train(splits, cfg, on_iteration=on_it)
            final[(strategy, seed)] = result.history[-1].train_err
            mid_fp[(strategy, seed)] = snap["fp"]
    elapsed = time.monotonic() - t0

    worst_err = max(final.values())
    diverged = [s for s in (0, 1, 2) if mid_fp[("CT", s)] != mid_fp[("FT", s)]]
    ok = worst_err <= 0.05 and len(diverged) == 3 and elapsed < 60
    report(
        "two-moons comparison",
        ok,
        f"CT and FT both reach >=95% train accuracy on 3 seeds (worst err "
        f"{worst_err:.3f}); weights differ at iteration 300 of 1000 on "
        f"{len(diverged)}/3 seeds; {elapsed:.1f}s (cap 60)",
    )


def _smoke_splits():
    data_dir = Path(__file__).resolve().parents[1] / "data" / "mnist-back-image"
    train_files = sorted(data_dir.glob("*train*.amat"))
    test_files = sorted(data_dir.glob("*test*.amat"))
    if train_files and test_files:
        full = load_amat(train_files[0], image_shape=(1, 28, 28))
        test_full = load_amat(test_files[0], image_shape=(1, 28, 28))
        splits = {"train": full.subset(np.arange(min(2000, full.n)))}
        if full.n >= 2200:
            splits["val"] = full.subset(np.arange(2000, 2200))
        splits["test"] = test_full.subset(np.arange(min(2000, test_full.n)))
        return splits, f"real files under {data_dir}"
    (tr, va, te) = build_standin()
    as_ds = lambda xy: Dataset(xy[0], xy[1], class_count=10,
                               image_shape=(1, 28, 28))
    splits = {"train": as_ds(tr), "val": as_ds(va), "test": as_ds(te)}
    return splits, "stand-in dataset (mnist-back-image files absent)"


def test_end_to_end_smoke_on_cluttered_digits():
    t0 = time.monotonic()
    splits, source = _smoke_splits()
    base = dict(
        architecture="cnn-a-small", epochs=20, batch_size=32,
        confidence=0.95, gamma_max_simp_fraction=0.5,
        adam=AdamSettings(), seed=0, record_seconds=False,
    )
    ct = train(splits, TrainerConfig(strategy="CT", eta=0.1, tau1=0, **base))
    ft = train(splits, TrainerConfig(strategy="FT", eta=5.0, tau1=10,
                                     trace=True, **base))
    elapsed = time.monotonic() - t0

    ct_test = ct.history[-1].test_err
    ft_test = ft.history[-1].test_err
    last_tau_pos = max((g for g, tau, _, _ in ft.trace if tau > 0), default=0)
    active = [i for i, r in enumerate(ft.history) if r.mean_tau >= 1.0]
    gaps = [ft.history[i].train_err - ct.history[i].train_err for i in active]
    n_pos = sum(g > 0 for g in gaps)
    mean_gap = float(np.mean(gaps)) if gaps else 0.0

    ok = (ct_test < 0.40 and ft_test < 0.40
          and 0 < last_tau_pos < ft.gamma_max_simp
          and gaps and 2 * n_pos > len(gaps) and mean_gap > 0.0
          and elapsed < 900)
    report(
        "end-to-end smoke",
        ok,
        f"{source}; test err CT {ct_test:.3f} / FT {ft_test:.3f} (cap 0.40); "
        f"perturbation budget hit 0 at iteration {last_tau_pos} < horizon "
        f"{ft.gamma_max_simp}; FT train err above CT in {n_pos}/{len(gaps)} "
        f"perturbed epochs, mean gap {mean_gap:+.4f}; {elapsed:.0f}s (cap 900)",
    )


def test_repeat_runs_are_byte_reproducible(tmp_path):
    raw = {
        "dataset": {"kind": "two_moons", "train_n": 64, "val_n": 32,
                    "test_n": 32, "noise_std": 0.1, "seed": 0},
        "architecture": "toy-moons",
        "strategy": "FT",
        "epochs": 3,
        "batch_size": 16,
        "eta": 0.1,
        "tau1": 3,
        "confidence": 0.95,
        "gamma_max_simp_fraction": 0.5,
        "seeds": [0],
        "record_seconds": False,
    }
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps(raw))
    dirs = [tmp_path / name for name in ("a", "b", "c", "d")]
    for out in dirs[:2]:
        assert main(["train", "--config", str(cfg), "--output-dir", str(out)]) == 0
    for out in dirs[2:]:
        assert main(["train", "--config", str(cfg), "--output-dir", str(out),
                     "--record-seconds"]) == 0

    h = [
        (d / "history_FT_seed0.csv").read_bytes() for d in dirs
    ]
    identical_when_untimed = h[0] == h[1]
    strip = lambda raw_bytes: [
        line.rsplit(",", 1)[0] for line in raw_bytes.decode().splitlines()
    ]
    identical_rows_when_timed = strip(h[2]) == strip(h[3])
    summaries_identical = (
        (dirs[0] / "summary.csv").read_bytes() == (dirs[1] / "summary.csv").read_bytes()
        and (dirs[2] / "summary.csv").read_bytes() == (dirs[3] / "summary.csv").read_bytes()
    )
    ok = identical_when_untimed and identical_rows_when_timed and summaries_identical
    report(
        "deterministic reruns",
        ok,
        "identical configs give byte-identical history CSVs with timing off "
        "and identical rows apart from the seconds column with timing on",
    )
