"""Command-line experiment runner.

Subcommands:

    train         run one experiment (all configured seeds)
    grid          Cartesian hyper-parameter sweep from list-valued fields
    gradcheck     finite-difference audit of every layer kind / a preset
    make-moons    write a synthetic two-moons dataset as `.amat`
    inspect-amat  summarize an `.amat` file

Exit codes: 0 success, 1 config or input error, 2 numeric failure,
3 I/O error. All result files are written atomically.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import build_splits, expand_grid, load_config, validate_experiment
from .curriculum import train
from .data import load_amat, render_amat, two_moons
from .errors import InputError, NumericFailure
from .evaluation import (
    save_snapshot,
    select_best,
    write_history_csv,
    write_summary_csv,
    write_text_atomic,
    write_trace_csv,
)
from .nn.architectures import load_descriptor
from .nn.gradcheck import GRAD_TOL, grad_check, layer_report
from .nn.layers import MODE_EVAL, MODE_TRAIN


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="friendlytrain",
        description="Train classifiers with input-simplifying curricula.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one experiment")
    p_train.add_argument("--config", required=True, help="JSON experiment config")
    p_train.add_argument("--strategy", choices=("CT", "FT", "EEF"))
    p_train.add_argument("--seed", type=int, action="append",
                         help="override config seeds (repeatable)")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", type=int)
    p_train.add_argument("--eta", type=float)
    p_train.add_argument("--tau1", type=int)
    p_train.add_argument("--confidence", type=float)
    p_train.add_argument("--gamma-max-simp-fraction", type=float)
    p_train.add_argument("--arch", help="override the architecture reference")
    p_train.add_argument("--output-dir")
    p_train.add_argument("--trace", action=argparse.BooleanOptionalAction)
    p_train.add_argument("--record-seconds", action=argparse.BooleanOptionalAction)
    p_train.add_argument("--verbose", action="store_true", help="print every epoch")
    p_train.set_defaults(func=cmd_train)

    p_grid = sub.add_parser("grid", help="hyper-parameter grid search")
    p_grid.add_argument("--config", required=True,
                        help="JSON config; eta/tau1/confidence/gamma_max_simp_fraction "
                             "may be lists")
    p_grid.add_argument("--output-dir")
    p_grid.set_defaults(func=cmd_grid)

    p_gc = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p_gc.add_argument("--arch", help="preset name or descriptor path "
                                     "(default: every layer kind plus both presets)")
    p_gc.add_argument("--input-shape", default=None,
                      help="per-example shape for --arch files, e.g. 12 or 1,8,8")
    p_gc.add_argument("--seed", type=int, default=0)
    p_gc.add_argument("--epsilon", type=float, default=1e-5)
    p_gc.set_defaults(func=cmd_gradcheck)

    p_mm = sub.add_parser("make-moons", help="write a two-moons dataset")
    p_mm.add_argument("--out", required=True, help="output `.amat` path")
    p_mm.add_argument("--n", type=int, default=1000)
    p_mm.add_argument("--noise-std", type=float, default=0.1)
    p_mm.add_argument("--seed", type=int, default=0)
    p_mm.set_defaults(func=cmd_make_moons)

    p_ia = sub.add_parser("inspect-amat", help="summarize an `.amat` file")
    p_ia.add_argument("path")
    p_ia.add_argument("--feature-count", type=int, default=None)
    p_ia.add_argument("--limit", type=int, default=5, help="preview rows to print")
    p_ia.set_defaults(func=cmd_inspect_amat)

    return parser


_OVERRIDES = (
    ("strategy", "strategy"),
    ("epochs", "epochs"),
    ("batch_size", "batch_size"),
    ("eta", "eta"),
    ("tau1", "tau1"),
    ("confidence", "confidence"),
    ("gamma_max_simp_fraction", "gamma_max_simp_fraction"),
    ("arch", "architecture"),
    ("output_dir", "output_dir"),
    ("trace", "trace"),
    ("record_seconds", "record_seconds"),
)


def _save_npy_atomic(path: Path, arr):
    import os
    import tempfile

    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.save(fh, arr)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_with_overrides(args):
    raw, base_dir = load_config(args.config)
    for attr, field in _OVERRIDES:
        value = getattr(args, attr, None)
        if value is not None:
            raw[field] = value
    if getattr(args, "seed", None):
        raw["seeds"] = list(args.seed)
    return raw, base_dir


def _run_one(cfg, splits, seed, out_dir: Path, verbose=False):
    """Train one seed, write its files; returns (best_epoch, val, test) or None."""
    tag = f"{cfg.strategy}_seed{seed}"
    records = []

    def on_epoch(record, net):
        records.append(record)
        if verbose:
            print(
                f"  epoch {record.epoch}: train_err={record.train_err:.4f} "
                f"val_err={record.val_err:.4f} test_err={record.test_err:.4f} "
                f"mean_tau={record.mean_tau:.2f}"
            )

    try:
        result = train(splits, cfg.trainer_config(seed), on_epoch=on_epoch)
    except NumericFailure:
        write_history_csv(records, out_dir / f"history_{tag}.csv")
        raise
    write_history_csv(result.history, out_dir / f"history_{tag}.csv")
    if result.trace is not None:
        write_trace_csv(result.trace, out_dir / f"trace_{tag}.csv")
    for epoch, (x, delta, x_tilde) in result.perturbation_dumps.items():
        _save_npy_atomic(out_dir / f"dump_{tag}_epoch{epoch}_x.npy", x)
        _save_npy_atomic(out_dir / f"dump_{tag}_epoch{epoch}_delta.npy", delta)
        _save_npy_atomic(out_dir / f"dump_{tag}_epoch{epoch}_xtilde.npy", x_tilde)
    if not result.history:
        return None
    best_idx = select_best(result.history)
    best = result.history[best_idx]
    net = result.network
    net.load_parameters(result.best_params)
    if result.best_buffers:
        net.load_buffers(result.best_buffers)
    _, layers = load_descriptor(cfg.architecture)
    save_snapshot(net, layers, result.best_epoch, out_dir / f"best_{tag}.npz")
    return result.best_epoch, best.val_err, best.test_err


def cmd_train(args) -> int:
    raw, base_dir = _load_with_overrides(args)
    cfg = validate_experiment(raw, base_dir=base_dir)
    splits = build_splits(cfg)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary_rows = []
    failed = False
    for seed in cfg.seeds:
        print(f"training strategy={cfg.strategy} seed={seed} ...")
        try:
            outcome = _run_one(cfg, splits, seed, out_dir, verbose=args.verbose)
        except NumericFailure as e:
            print(f"numeric failure (seed {seed}): {e}", file=sys.stderr)
            print(f"partial history kept in {out_dir}", file=sys.stderr)
            failed = True
            continue
        if outcome is None:
            continue
        best_epoch, val_err, test_err = outcome
        summary_rows.append((cfg.strategy, seed, best_epoch, test_err))
        print(f"  best epoch {best_epoch}: val_err={val_err:.4f} test_err={test_err:.4f}")
    if summary_rows:
        write_summary_csv(summary_rows, out_dir / "summary.csv")
        print(f"wrote {out_dir}/summary.csv")
    return 2 if failed else 0


def cmd_grid(args) -> int:
    raw, base_dir = load_config(args.config)
    if args.output_dir is not None:
        raw["output_dir"] = args.output_dir
    combos = expand_grid(raw, base_dir=base_dir)
    if not combos:
        raise InputError("grid: no combinations to run")
    out_dir = Path(combos[0][1].output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    header = "eta,tau1,confidence,gamma_max_simp_fraction,seed,best_epoch,val_err,test_err,status"
    done = []
    failed = []
    for i, (combo, cfg) in enumerate(combos):
        splits = build_splits(cfg)
        for seed in cfg.seeds:
            label = ",".join(f"{k}={v}" for k, v in combo.items())
            print(f"grid run {i + 1}/{len(combos)} seed={seed}: {label}")
            base = (combo["eta"], combo["tau1"], combo["confidence"],
                    combo["gamma_max_simp_fraction"], seed)
            try:
                result = train(splits, cfg.trainer_config(seed))
            except NumericFailure as e:
                print(f"  failed: {e}", file=sys.stderr)
                failed.append(base + ("", "", "failed"))
                continue
            if not result.history:
                failed.append(base + ("", "", "empty"))
                continue
            best = result.history[select_best(result.history)]
            done.append(base + (best.epoch, best.val_err, best.test_err, "ok"))

    done.sort(key=lambda row: row[6])
    rows = done + failed
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, float) else str(v)
                              for v in row))
    write_text_atomic(out_dir / "grid.csv", "\n".join(lines) + "\n")
    print(f"wrote {out_dir}/grid.csv ({len(done)} ok, {len(failed)} failed)")
    if done:
        best = done[0]
        print(
            f"best: eta={best[0]} tau1={best[1]} confidence={best[2]} "
            f"gamma_max_simp_fraction={best[3]} seed={best[4]} "
            f"val_err={best[6]} test_err={best[7]}"
        )
    return 0


def _parse_shape(text):
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise InputError(f"--input-shape: expected comma-separated integers, got {text!r}") \
            from None


def cmd_gradcheck(args) -> int:
    rows = []
    if args.arch is None:
        report = layer_report(seed=args.seed, epsilon=args.epsilon)
        rows.extend(sorted(report.items()))
        from .nn.gradcheck import preset_report

        for name, err in preset_report(seed=args.seed, epsilon=args.epsilon,
                                       presets=("fc-a", "cnn-a-small")).items():
            rows.append((name, err))
    else:
        shape = _parse_shape(args.input_shape) if args.input_shape else None
        rows.append((args.arch, _check_arch(args.arch, shape, args.seed, args.epsilon)))

    width = max(len(name) for name, _ in rows)
    failed = False
    print(f"{'target'.ljust(width)}  max_rel_err  status")
    for name, err in rows:
        ok = err < GRAD_TOL
        failed = failed or not ok
        print(f"{name.ljust(width)}  {err:.3e}    {'ok' if ok else 'FAIL'}")
    if failed:
        print(f"gradient check failed (threshold {GRAD_TOL})", file=sys.stderr)
        return 2
    return 0


def _check_arch(arch, input_shape, seed, epsilon):
    from .nn.architectures import build_network
    from .nn.gradcheck import _PRESET_PROBES

    if input_shape is None:
        input_shape = _PRESET_PROBES.get(arch)
    if input_shape is None:
        _, layers = load_descriptor(arch)
        kinds = {spec["kind"] for spec in layers}
        input_shape = (1, 8, 8) if kinds & {"conv2d", "maxpool2d"} else (12,)
    rng = np.random.default_rng(seed)
    net = build_network(arch, input_shape, class_count=3, seed=seed)
    batch = 2 if len(input_shape) == 3 else 4
    x = rng.standard_normal((batch, int(np.prod(input_shape))))
    labels = rng.integers(0, 3, size=batch)
    worst = 0.0
    for mode in (MODE_EVAL, MODE_TRAIN):
        worst = max(worst, grad_check(net, x, labels, epsilon=epsilon, mode=mode,
                                      mask_seed=seed + 1))
    return worst


def cmd_make_moons(args) -> int:
    ds = two_moons(args.n, args.noise_std, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_text_atomic(out, render_amat(ds))
    print(f"wrote {out} ({ds.n} examples, 2 features, 2 classes)")
    return 0


def cmd_inspect_amat(args) -> int:
    ds = load_amat(args.path, feature_count=args.feature_count)
    counts = np.bincount(ds.labels, minlength=ds.class_count)
    print(f"path:        {args.path}")
    print(f"examples:    {ds.n}")
    print(f"features:    {ds.feature_count}")
    print(f"classes:     {ds.class_count}")
    print(f"class sizes: {', '.join(f'{i}: {c}' for i, c in enumerate(counts))}")
    print(f"value range: [{ds.features.min():.6g}, {ds.features.max():.6g}]")
    limit = max(0, args.limit)
    for i in range(min(limit, ds.n)):
        row = ds.features[i]
        shown = " ".join(f"{v:.4g}" for v in row[:8])
        more = " ..." if ds.feature_count > 8 else ""
        print(f"row {i}: [{shown}{more}] label={ds.labels[i]}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except NumericFailure as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
