"""Experiment configuration: JSON schema, validation, split building.

Configs are plain JSON objects. Validation runs before any work starts
and every failure names the offending field, e.g.
``confidence: must be in (0, 1], got 1.05``.

Top-level fields (defaults in parentheses):

    dataset                  object, see below (required)
    architecture             preset name, descriptor path, or inline object (required)
    strategy                 "CT" | "FT" | "EEF" ("FT")
    epochs                   int >= 0 (20)
    batch_size               int >= 1 (32)
    eta                      inner-loop learning rate > 0 (0.1)
    tau1                     initial inner-step budget, int >= 0 (0)
    confidence               early-stop threshold in (0, 1] (0.95)
    gamma_max_simp_fraction  plan horizon as a fraction of total iterations, in (0, 1) (0.5)
    adam                     {"alpha", "beta1", "beta2", "epsilon"} (canonical defaults)
    seeds                    non-empty list of ints >= 0 ([0])
    output_dir               where CSVs and snapshots go ("runs")
    trace                    write a per-iteration trace CSV (false)
    record_seconds           wall-clock seconds in the history CSV; turn off
                             for byte-identical reruns (true)
    dump_epochs              1-based epochs whose first batch gets its
                             (x, delta, x_tilde) arrays dumped, FT only ([])

Dataset objects:

    {"kind": "two_moons", "train_n": 1000, "val_n": 200, "test_n": 200,
     "noise_std": 0.1, "seed": 0}
    {"kind": "amat", "train_path": ..., "test_path": ..., "val_path": ...,
     "val_fraction": 0.1, "split_seed": 0, "feature_count": null,
     "class_count": null, "image_shape": [1, 28, 28], "train_subset_n": null}

For "amat", only train_path is required. Without val_path a fraction of
the training file (default 10%) is carved off as validation with a
seeded shuffle. ``train_subset_n`` keeps only the first n training rows
after the carve. Relative paths resolve against the config file's
directory. In grid configs, eta / tau1 / confidence /
gamma_max_simp_fraction may be lists; the grid is their Cartesian
product.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace
from pathlib import Path

from .curriculum import STRATEGIES, TrainerConfig
from .data import load_amat, split_dataset, two_moons
from .errors import ConfigError
from .optim import AdamSettings

GRID_FIELDS = ("eta", "tau1", "confidence", "gamma_max_simp_fraction")

_TOP_LEVEL = {
    "dataset", "architecture", "strategy", "epochs", "batch_size", "eta", "tau1",
    "confidence", "gamma_max_simp_fraction", "adam", "seeds", "output_dir",
    "trace", "record_seconds", "dump_epochs",
}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict
    architecture: object
    strategy: str
    epochs: int
    batch_size: int
    eta: float
    tau1: int
    confidence: float
    gamma_max_simp_fraction: float
    adam: AdamSettings
    seeds: tuple[int, ...]
    output_dir: str
    trace: bool
    record_seconds: bool
    dump_epochs: tuple[int, ...]

    def trainer_config(self, seed: int) -> TrainerConfig:
        return TrainerConfig(
            architecture=self.architecture,
            strategy=self.strategy,
            epochs=self.epochs,
            batch_size=self.batch_size,
            eta=self.eta,
            tau1=self.tau1,
            confidence=self.confidence,
            gamma_max_simp_fraction=self.gamma_max_simp_fraction,
            adam=self.adam,
            seed=seed,
            trace=self.trace,
            record_seconds=self.record_seconds,
            dump_epochs=self.dump_epochs,
        )


def load_config(path):
    """Read a JSON config file; returns (raw dict, its directory)."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return raw, path.parent


def _need(raw, field, kinds, where, predicate=None, hint=""):
    if field not in raw:
        raise ConfigError(f"{where}{field}: required field is missing")
    return _coerce(raw[field], field, kinds, where, predicate, hint)


def _take(raw, field, kinds, where, default, predicate=None, hint=""):
    if field not in raw or raw[field] is None:
        return default
    return _coerce(raw[field], field, kinds, where, predicate, hint)


def _coerce(value, field, kinds, where, predicate, hint):
    if kinds is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kinds) or isinstance(value, bool) and kinds is not bool:
        want = kinds.__name__ if isinstance(kinds, type) else "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"{where}{field}: expected {want}, got {value!r}")
    if predicate is not None and not predicate(value):
        raise ConfigError(f"{where}{field}: {hint}, got {value!r}")
    return value


def _int_list(value, field, where, minimum):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where}{field}: expected a non-empty list of integers")
    out = []
    for v in value:
        if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
            raise ConfigError(f"{where}{field}: entries must be integers >= {minimum}, got {v!r}")
        out.append(v)
    return tuple(out)


def _validate_dataset(raw, base_dir) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("dataset: expected an object")
    kind = raw.get("kind")
    if kind == "two_moons":
        allowed = {"kind", "train_n", "val_n", "test_n", "noise_std", "seed"}
        unknown = set(raw) - allowed
        if unknown:
            raise ConfigError(f"dataset: unknown field(s) {sorted(unknown)} for kind two_moons")
        return {
            "kind": "two_moons",
            "train_n": _take(raw, "train_n", int, "dataset.", 1000, lambda v: v >= 2,
                             "must be at least 2"),
            "val_n": _take(raw, "val_n", int, "dataset.", 200, lambda v: v >= 0,
                           "must be non-negative"),
            "test_n": _take(raw, "test_n", int, "dataset.", 200, lambda v: v >= 0,
                            "must be non-negative"),
            "noise_std": _take(raw, "noise_std", float, "dataset.", 0.1, lambda v: v >= 0,
                               "must be non-negative"),
            "seed": _take(raw, "seed", int, "dataset.", 0, lambda v: v >= 0,
                          "must be non-negative"),
        }
    if kind == "amat":
        allowed = {"kind", "train_path", "val_path", "test_path", "val_fraction",
                   "split_seed", "feature_count", "class_count", "image_shape",
                   "train_subset_n"}
        unknown = set(raw) - allowed
        if unknown:
            raise ConfigError(f"dataset: unknown field(s) {sorted(unknown)} for kind amat")
        base = Path(base_dir) if base_dir is not None else Path(".")

        def resolve(p):
            p = Path(p)
            return str(p if p.is_absolute() else base / p)

        spec = {
            "kind": "amat",
            "train_path": resolve(_need(raw, "train_path", str, "dataset.")),
            "val_path": None,
            "test_path": None,
            "val_fraction": _take(raw, "val_fraction", float, "dataset.", 0.1,
                                  lambda v: 0.0 < v < 1.0, "must be in (0, 1)"),
            "split_seed": _take(raw, "split_seed", int, "dataset.", 0, lambda v: v >= 0,
                                "must be non-negative"),
            "feature_count": _take(raw, "feature_count", int, "dataset.", None,
                                   lambda v: v >= 1, "must be positive"),
            "class_count": _take(raw, "class_count", int, "dataset.", None,
                                 lambda v: v >= 2, "must be at least 2"),
            "image_shape": None,
            "train_subset_n": _take(raw, "train_subset_n", int, "dataset.", None,
                                    lambda v: v >= 1, "must be positive"),
        }
        if raw.get("val_path") is not None:
            spec["val_path"] = resolve(_coerce(raw["val_path"], "val_path", str, "dataset.",
                                               None, ""))
        if raw.get("test_path") is not None:
            spec["test_path"] = resolve(_coerce(raw["test_path"], "test_path", str, "dataset.",
                                                None, ""))
        if raw.get("image_shape") is not None:
            shape = _int_list(raw["image_shape"], "image_shape", "dataset.", 1)
            if len(shape) != 3:
                raise ConfigError(
                    f"dataset.image_shape: expected [channels, h, w], got {list(shape)}"
                )
            spec["image_shape"] = shape
        return spec
    raise ConfigError(
        f"dataset.kind: must be \"two_moons\" or \"amat\", got {kind!r}"
    )


def _validate_adam(raw) -> AdamSettings:
    if raw is None:
        return AdamSettings()
    if not isinstance(raw, dict):
        raise ConfigError("adam: expected an object")
    unknown = set(raw) - {"alpha", "beta1", "beta2", "epsilon"}
    if unknown:
        raise ConfigError(f"adam: unknown field(s) {sorted(unknown)}")
    defaults = AdamSettings()
    settings = AdamSettings(
        alpha=_take(raw, "alpha", float, "adam.", defaults.alpha),
        beta1=_take(raw, "beta1", float, "adam.", defaults.beta1),
        beta2=_take(raw, "beta2", float, "adam.", defaults.beta2),
        epsilon=_take(raw, "epsilon", float, "adam.", defaults.epsilon),
    )
    return settings.validate()


def validate_experiment(raw: dict, base_dir=None) -> ExperimentConfig:
    """Validate a parsed config; raises ConfigError naming the bad field."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = set(raw) - _TOP_LEVEL
    if unknown:
        raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
    if "dataset" not in raw:
        raise ConfigError("dataset: required field is missing")
    if "architecture" not in raw:
        raise ConfigError("architecture: required field is missing")

    architecture = raw["architecture"]
    if isinstance(architecture, str) and base_dir is not None:
        p = Path(architecture)
        if p.suffix == ".json" and not p.is_absolute():
            architecture = str(Path(base_dir) / p)

    cfg = ExperimentConfig(
        dataset=_validate_dataset(raw["dataset"], base_dir),
        architecture=architecture,
        strategy=_take(raw, "strategy", str, "", "FT"),
        epochs=_take(raw, "epochs", int, "", 20),
        batch_size=_take(raw, "batch_size", int, "", 32),
        eta=_take(raw, "eta", float, "", 0.1),
        tau1=_take(raw, "tau1", int, "", 0),
        confidence=_take(raw, "confidence", float, "", 0.95),
        gamma_max_simp_fraction=_take(raw, "gamma_max_simp_fraction", float, "", 0.5),
        adam=_validate_adam(raw.get("adam")),
        seeds=_int_list(raw.get("seeds", [0]), "seeds", "", 0),
        output_dir=_take(raw, "output_dir", str, "", "runs"),
        trace=_take(raw, "trace", bool, "", False),
        record_seconds=_take(raw, "record_seconds", bool, "", True),
        dump_epochs=(_int_list(raw["dump_epochs"], "dump_epochs", "", 1)
                     if raw.get("dump_epochs") else ()),
    )
    if cfg.strategy not in STRATEGIES:
        raise ConfigError(
            f"strategy: must be one of {', '.join(STRATEGIES)}, got {cfg.strategy!r}"
        )
    # The trainer-level validator owns the numeric range rules.
    cfg.trainer_config(cfg.seeds[0]).validate()
    return cfg


def expand_grid(raw: dict, base_dir=None):
    """Expand list-valued grid fields into experiment configs.

    Returns a list of (combo, config) where combo maps each grid field to
    its value in that run. Scalar fields participate as single values, so
    a config without lists yields exactly one combination.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    axes = []
    for field in GRID_FIELDS:
        value = raw.get(field)
        if isinstance(value, list):
            if not value:
                raise ConfigError(f"{field}: grid list must be non-empty")
            axes.append([(field, v) for v in value])
        elif value is not None:
            axes.append([(field, value)])
        else:
            axes.append([(field, None)])

    combos = []
    for assignment in itertools.product(*axes):
        scalar = dict(raw)
        combo = {}
        for field, value in assignment:
            if value is None:
                scalar.pop(field, None)
            else:
                scalar[field] = value
            combo[field] = value
        cfg = validate_experiment(scalar, base_dir=base_dir)
        combo = {f: getattr(cfg, f) for f in GRID_FIELDS}
        combos.append((combo, cfg))
    return combos


def build_splits(cfg: ExperimentConfig):
    """Materialize the dataset splits a config describes."""
    spec = cfg.dataset
    if spec["kind"] == "two_moons":
        seed = spec["seed"]
        splits = {"train": two_moons(spec["train_n"], spec["noise_std"], seed)}
        if spec["val_n"] >= 2:
            splits["val"] = two_moons(spec["val_n"], spec["noise_std"], seed + 1)
        if spec["test_n"] >= 2:
            splits["test"] = two_moons(spec["test_n"], spec["noise_std"], seed + 2)
        return splits

    train = load_amat(
        spec["train_path"],
        feature_count=spec["feature_count"],
        class_count=spec["class_count"],
        image_shape=spec["image_shape"],
    )
    splits = {"train": train}
    if spec["val_path"] is not None:
        splits["val"] = load_amat(
            spec["val_path"],
            feature_count=spec["feature_count"],
            class_count=spec["class_count"],
            image_shape=spec["image_shape"],
        )
    else:
        splits["train"], splits["val"] = split_dataset(
            train, spec["val_fraction"], spec["split_seed"]
        )
    if spec["test_path"] is not None:
        splits["test"] = load_amat(
            spec["test_path"],
            feature_count=spec["feature_count"],
            class_count=spec["class_count"],
            image_shape=spec["image_shape"],
        )
    if spec["train_subset_n"] is not None:
        keep = min(spec["train_subset_n"], splits["train"].n)
        splits["train"] = splits["train"].subset(range(keep))

    # Reconcile class counts inferred independently per file.
    c = max(ds.class_count for ds in splits.values())
    for name, ds in splits.items():
        if ds.class_count != c:
            splits[name] = replace(ds, class_count=c)
    return splits
