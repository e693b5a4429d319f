"""Experiment configuration and its TOML file format.

Grammar (all sections optional, unknown keys rejected)::

    rounds = 100                 # R, required
    master_seed = 0
    seeds = [0, 1, 2, 3, 4]      # one full run per seed; defaults to [master_seed]
    output_path = "results"
    workers = 1

    [data]
    dataset = "synthetic"        # required: "synthetic" | "idx_mnist"
    distribution = "B"           # A, B, C, A_star, B_star, or a list of ten shares
    num_agents = 10
    alice_index = 0
    samples_per_agent = 100
    test_fraction = 0.2
    input_dim = 20               # synthetic only
    spread = 1.0                 # synthetic only
    per_class = 0                # synthetic only; 0 derives the minimum that fits
    images_path = "..."          # idx_mnist only
    labels_path = "..."

    [model]
    kind = "linear_softmax"      # or "mlp"
    hidden_dims = []

    [optimizer]
    eta_l = 0.1
    eta_g = 1.0
    batch_size = 32
    local_steps = 0              # 0 means one local epoch per round

    [algorithm]
    name = "waffle"              # required: local, fedavg, scaffold, waffle, waffle_nocv
    schedule = "sigmoid"         # sigmoid | constant
    delta_omega = 3.2
    schedule_offset = 0
    schedule_value = 1.0         # constant schedule only
    control_update = "reweighted"  # or "additive"
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import DISTRIBUTIONS, NUM_LABELS
from .weights import DEFAULT_DELTA_OMEGA

ALGORITHMS = ("local", "fedavg", "scaffold", "waffle", "waffle_nocv")
DATASETS = ("synthetic", "idx_mnist")
CONTROL_UPDATES = ("reweighted", "additive")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    algorithm: str
    rounds: int
    distribution: str | tuple[float, ...] = "A"
    num_agents: int = 10
    alice_index: int = 0
    samples_per_agent: int = 100
    test_fraction: float = 0.2
    input_dim: int = 20
    spread: float = 1.0
    per_class: int = 0
    images_path: str = ""
    labels_path: str = ""
    model_kind: str = "linear_softmax"
    hidden_dims: tuple[int, ...] = ()
    eta_l: float = 0.1
    eta_g: float = 1.0
    batch_size: int = 32
    local_steps: int = 0
    schedule: str = "sigmoid"
    delta_omega: float = DEFAULT_DELTA_OMEGA
    schedule_offset: int = 0
    schedule_value: float = 1.0
    control_update: str = "reweighted"
    master_seed: int = 0
    seeds: tuple[int, ...] = ()
    output_path: str = "results"
    workers: int = 1

    def __post_init__(self):
        validate(self)

    @property
    def distribution_name(self) -> str:
        return self.distribution if isinstance(self.distribution, str) else "custom"

    @property
    def seed_list(self) -> tuple[int, ...]:
        return self.seeds or (self.master_seed,)

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


# file section -> {file key: dataclass field}
_LAYOUT: dict[str | None, dict[str, str]] = {
    None: {
        "rounds": "rounds",
        "master_seed": "master_seed",
        "seeds": "seeds",
        "output_path": "output_path",
        "workers": "workers",
    },
    "data": {
        k: k
        for k in (
            "dataset",
            "distribution",
            "num_agents",
            "alice_index",
            "samples_per_agent",
            "test_fraction",
            "input_dim",
            "spread",
            "per_class",
            "images_path",
            "labels_path",
        )
    },
    "model": {"kind": "model_kind", "hidden_dims": "hidden_dims"},
    "optimizer": {k: k for k in ("eta_l", "eta_g", "batch_size", "local_steps")},
    "algorithm": {
        "name": "algorithm",
        "schedule": "schedule",
        "delta_omega": "delta_omega",
        "schedule_offset": "schedule_offset",
        "schedule_value": "schedule_value",
        "control_update": "control_update",
    },
}

_INT_FIELDS = {
    "rounds", "master_seed", "workers", "num_agents", "alice_index", "samples_per_agent",
    "input_dim", "per_class", "batch_size", "local_steps", "schedule_offset",
}
_FLOAT_FIELDS = {"test_fraction", "spread", "eta_l", "eta_g", "delta_omega", "schedule_value"}
_STR_FIELDS = {
    "dataset", "algorithm", "images_path", "labels_path", "model_kind", "schedule", "output_path",
    "control_update",
}


def _coerce(name: str, value):
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return value
    if name in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        return float(value)
    if name in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected a string, got {value!r}")
        return value
    if name in ("seeds", "hidden_dims"):
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{name}: expected a list of integers, got {value!r}")
        return tuple(value)
    if name == "distribution":
        if isinstance(value, str):
            return value
        if isinstance(value, list) and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            return tuple(float(v) for v in value)
        raise ConfigError(f"distribution: expected a name or a list of numbers, got {value!r}")
    raise ConfigError(f"{name}: unhandled field")


def _require(cond: bool, key: str, constraint: str) -> None:
    if not cond:
        raise ConfigError(f"{key}: must be {constraint}")


def validate(cfg: ExperimentConfig) -> None:
    _require(cfg.dataset in DATASETS, "dataset", f"one of {DATASETS}")
    _require(cfg.algorithm in ALGORITHMS, "algorithm", f"one of {ALGORITHMS}")
    _require(cfg.rounds >= 0, "rounds", ">= 0")
    if isinstance(cfg.distribution, str):
        _require(cfg.distribution in DISTRIBUTIONS, "distribution", f"one of {sorted(DISTRIBUTIONS)}")
    else:
        props = cfg.distribution
        _require(len(props) == NUM_LABELS, "distribution", f"a list of {NUM_LABELS} shares")
        _require(all(p >= 0 for p in props), "distribution", "non-negative")
        _require(abs(sum(props) - 1.0) <= 1e-9, "distribution", "summing to 1")
    _require(cfg.num_agents >= 1, "num_agents", ">= 1")
    _require(0 <= cfg.alice_index < cfg.num_agents, "alice_index", "in [0, num_agents)")
    _require(cfg.samples_per_agent >= 1, "samples_per_agent", ">= 1")
    _require(0.0 < cfg.test_fraction < 1.0, "test_fraction", "in (0, 1)")
    _require(cfg.input_dim >= 1, "input_dim", ">= 1")
    _require(cfg.spread > 0, "spread", "> 0")
    _require(cfg.per_class >= 0, "per_class", ">= 0")
    if cfg.dataset == "idx_mnist":
        _require(bool(cfg.images_path and cfg.labels_path), "images_path", "set for idx_mnist")
    _require(cfg.model_kind in ("linear_softmax", "mlp"), "kind", "linear_softmax or mlp")
    _require(all(h >= 1 for h in cfg.hidden_dims), "hidden_dims", "positive")
    _require(cfg.eta_l > 0, "eta_l", "> 0")
    _require(cfg.eta_g > 0, "eta_g", "> 0")
    _require(cfg.batch_size >= 1, "batch_size", ">= 1")
    _require(cfg.local_steps >= 0, "local_steps", ">= 0")
    _require(cfg.schedule in ("sigmoid", "constant"), "schedule", "sigmoid or constant")
    _require(cfg.delta_omega > 0, "delta_omega", "> 0")
    _require(0.0 < cfg.schedule_value <= 1.0, "schedule_value", "in (0, 1]")
    _require(
        cfg.control_update in CONTROL_UPDATES, "control_update", f"one of {CONTROL_UPDATES}"
    )
    _require(cfg.workers >= 1, "workers", ">= 1")


def config_from_dict(raw: dict) -> ExperimentConfig:
    kwargs = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            if key not in _LAYOUT or key is None:
                raise ConfigError(f"[{key}]: unknown section")
            section = _LAYOUT[key]
            for sub, sub_value in value.items():
                if sub not in section:
                    raise ConfigError(f"{key}.{sub}: unknown key")
                kwargs[section[sub]] = _coerce(section[sub], sub_value)
        elif key in _LAYOUT[None]:
            kwargs[key] = _coerce(key, value)
        else:
            raise ConfigError(f"{key}: unknown key")
    for required in ("dataset", "algorithm", "rounds"):
        if required not in kwargs:
            raise ConfigError(f"{required}: missing required key")
    return ExperimentConfig(**kwargs)


def parse_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


def dump_config(cfg: ExperimentConfig) -> str:
    """Render ``cfg`` back into the TOML grammar above."""

    def fmt(v):
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, (tuple, list)):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        return repr(v)

    lines = []
    for section, keys in _LAYOUT.items():
        if section is not None:
            lines.append(f"\n[{section}]")
        for file_key, attr in keys.items():
            lines.append(f"{file_key} = {fmt(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def write_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(dump_config(cfg))
    return path
