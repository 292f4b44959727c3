"""Architecture descriptors: JSON layer lists and the shipped presets.

A descriptor is a JSON object ``{"name": ..., "layers": [...]}`` (or a
bare list of layer objects). Each layer object names its ``kind`` plus
kind-specific fields:

    {"kind": "linear",    "units": 10 | null}      null = class count
    {"kind": "conv2d",    "channels": 8, "kernel": 3, "stride": 1, "padding": 1}
    {"kind": "maxpool2d", "kernel": 2, "stride": 2}
    {"kind": "batchnorm", "momentum": 0.1}
    {"kind": "dropout",   "p": 0.25}
    {"kind": "relu"} / {"kind": "tanh"} / {"kind": "flatten"}

Input width is never part of a descriptor: linear/conv input sizes are
resolved from the incoming shape when the network is built, so the same
descriptor serves full-size data and tiny gradient-check instances.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .layers import BatchNorm, Conv2d, Dropout, Flatten, Linear, MaxPool2d, ReLU, Tanh
from .network import Network

PRESET_NAMES = ("fc-a", "cnn-a-small", "toy-moons")

# kind -> (required fields, optional fields with defaults)
_FIELDS = {
    "linear": ({"units"}, {}),
    "conv2d": ({"channels", "kernel"}, {"stride": 1, "padding": 0}),
    "maxpool2d": ({"kernel"}, {"stride": None}),
    "batchnorm": (set(), {"momentum": 0.1, "eps": 1e-5}),
    "dropout": ({"p"}, {}),
    "relu": (set(), {}),
    "tanh": (set(), {}),
    "flatten": (set(), {}),
}

_BUILDERS = {
    "linear": Linear,
    "conv2d": Conv2d,
    "maxpool2d": MaxPool2d,
    "batchnorm": BatchNorm,
    "dropout": Dropout,
    "relu": ReLU,
    "tanh": Tanh,
    "flatten": Flatten,
}


def validate_layer_list(layers) -> list[dict]:
    """Check descriptor structure; returns the normalized layer list."""
    if not isinstance(layers, list) or not layers:
        raise ConfigError("architecture.layers: must be a non-empty list of layer objects")
    out = []
    for i, spec in enumerate(layers):
        where = f"architecture.layers[{i}]"
        if not isinstance(spec, dict):
            raise ConfigError(f"{where}: must be an object, got {type(spec).__name__}")
        kind = spec.get("kind")
        if kind not in _FIELDS:
            raise ConfigError(
                f"{where}.kind: unknown layer kind {kind!r}; expected one of {sorted(_FIELDS)}"
            )
        required, optional = _FIELDS[kind]
        given = set(spec) - {"kind"}
        missing = required - given
        if missing:
            raise ConfigError(f"{where}: missing field(s) {sorted(missing)} for kind {kind!r}")
        unknown = given - required - set(optional)
        if unknown:
            raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)} for kind {kind!r}")
        out.append(dict(spec))
    last = out[-1]
    if not (last["kind"] == "linear" and last.get("units") is None):
        raise ConfigError(
            'architecture.layers: the last layer must be {"kind": "linear", "units": null} '
            "so the output width tracks the class count"
        )
    return out


def _instantiate(spec: dict, class_count: int):
    kind = spec["kind"]
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "linear" and kwargs.get("units") is None:
        kwargs["units"] = class_count
    if kind == "maxpool2d" and kwargs.get("stride", 0) is None:
        kwargs.pop("stride")
    return _BUILDERS[kind](**kwargs)


def preset_path(name: str) -> Path:
    if name not in PRESET_NAMES:
        raise ConfigError(f"architecture: unknown preset {name!r}; presets are {PRESET_NAMES}")
    return Path(str(resources.files(__package__) / "presets" / f"{name}.json"))


def load_descriptor(source) -> tuple[str, list[dict]]:
    """Resolve an architecture reference to (name, validated layer list).

    ``source`` may be a preset name, a path to a descriptor file, a parsed
    descriptor object, or a bare layer list.
    """
    if isinstance(source, str):
        path = preset_path(source) if source in PRESET_NAMES else Path(source)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"architecture file {path}: invalid JSON ({e})") from None
        name = source if source in PRESET_NAMES else path.stem
        return _from_parsed(raw, name)
    return _from_parsed(source, "inline")


def _from_parsed(raw, fallback_name: str) -> tuple[str, list[dict]]:
    if isinstance(raw, dict):
        name = raw.get("name", fallback_name)
        layers = raw.get("layers")
    else:
        name, layers = fallback_name, raw
    return str(name), validate_layer_list(layers)


def build_network(source, input_shape, class_count: int, seed: int = 0) -> Network:
    """Build a seeded Network from any architecture reference."""
    _, layers = load_descriptor(source)
    stack = [_instantiate(spec, class_count) for spec in layers]
    return Network(stack, input_shape=input_shape, class_count=class_count, seed=seed)


def descriptor_flat_width(input_shape) -> int:
    return int(np.prod(input_shape))
