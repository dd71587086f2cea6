"""Run configuration: a JSON document mirroring the key tree below, with
CLI flags taking precedence over file keys, and file keys over defaults.

    {
      "dataset": {"path": "...", "name": "..."}                 # TU directory
                 | {"synthetic": {"kind": "cycles_vs_stars",
                                  "per_class": 100,
                                  "size_min": 6, "size_max": 20,
                                  "seed": 42}},
      "preprocess": {"key_node_count": 8, "stride": 1, "neighborhood_depth": 2,
                     "ranking": "degree", "theta_rule": "inverse_hop"},
      "model": {"filters": 8, "components": 10, "conv_channels": 8,
                "hidden_dim": 64, "sigma_min": 0.001},
      "train": {"learning_rate": 0.01, "epochs": 200, "batch_size": 16,
                "seed": 42, "loss": "squared_error", "sigma_lr_scale": 0.1},
      "val_fraction": 0.2,
      "record_timing": false
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .data import GraphDataset, generate_synthetic, one_hot_encode, parse_tu_dataset
from .nn import ModelConfig, TrainConfig
from .preprocess import RANKINGS, THETA_RULES, PreprocessConfig


class ConfigError(ValueError):
    """Raised with a field-qualified message for invalid configuration."""


@dataclass
class DatasetSpec:
    path: str | None = None
    name: str | None = None
    synthetic: dict | None = None


@dataclass
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    val_fraction: float = 0.0
    record_timing: bool = False

    def to_dict(self) -> dict:
        return {
            "dataset": (
                {"synthetic": self.dataset.synthetic}
                if self.dataset.synthetic is not None
                else {"path": self.dataset.path, "name": self.dataset.name}
            ),
            "preprocess": {
                "key_node_count": self.preprocess.key_node_count,
                "stride": self.preprocess.stride,
                "neighborhood_depth": self.preprocess.neighborhood_depth,
                "ranking": self.preprocess.ranking,
                "theta_rule": self.preprocess.theta_rule,
            },
            "model": {
                "filters": self.model.filters,
                "components": self.model.components,
                "conv_channels": self.model.conv_channels,
                "hidden_dim": self.model.hidden_dim,
                "sigma_min": self.model.sigma_min,
            },
            "train": {
                "learning_rate": self.train.learning_rate,
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "seed": self.train.seed,
                "loss": self.train.loss,
                "sigma_lr_scale": self.train.sigma_lr_scale,
            },
            "val_fraction": self.val_fraction,
            "record_timing": self.record_timing,
        }


def _expect(doc: dict, key: str, kind, path: str, default=None, required=False):
    if key not in doc:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _positive(value, path: str, strict: bool = True):
    if strict and value <= 0:
        raise ConfigError(f"{path}: must be positive, got {value}")
    if not strict and value < 0:
        raise ConfigError(f"{path}: must be non-negative, got {value}")
    return value


def load_run_config(path) -> RunConfig:
    """Parse and validate a JSON run configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return run_config_from_dict(doc)


def run_config_from_dict(doc: dict) -> RunConfig:
    ds = _expect(doc, "dataset", dict, "", default={}) or {}
    spec = DatasetSpec()
    if "synthetic" in ds:
        syn = _expect(ds, "synthetic", dict, "dataset", required=True)
        kind = _expect(syn, "kind", str, "dataset.synthetic", required=True)
        if kind not in ("cycles_vs_stars", "two_density"):
            raise ConfigError(f"dataset.synthetic.kind: unknown kind {kind!r}")
        spec.synthetic = {
            "kind": kind,
            "per_class": _positive(_expect(syn, "per_class", int, "dataset.synthetic", default=100), "dataset.synthetic.per_class"),
            "size_min": _expect(syn, "size_min", int, "dataset.synthetic", default=6),
            "size_max": _expect(syn, "size_max", int, "dataset.synthetic", default=20),
            "seed": _expect(syn, "seed", int, "dataset.synthetic", default=0),
        }
        if spec.synthetic["size_min"] < 4 or spec.synthetic["size_max"] < spec.synthetic["size_min"]:
            raise ConfigError("dataset.synthetic.size_min/size_max: need 4 <= min <= max")
    elif ds:
        spec.path = _expect(ds, "path", str, "dataset", required=True)
        spec.name = _expect(ds, "name", str, "dataset")

    pp = _expect(doc, "preprocess", dict, "", default={}) or {}
    ranking = _expect(pp, "ranking", str, "preprocess", default="degree")
    if ranking not in RANKINGS:
        raise ConfigError(f"preprocess.ranking: must be one of {RANKINGS}")
    theta_rule = _expect(pp, "theta_rule", str, "preprocess", default="inverse_hop")
    if theta_rule not in THETA_RULES:
        raise ConfigError(f"preprocess.theta_rule: must be one of {THETA_RULES}")
    try:
        preprocess = PreprocessConfig(
            key_node_count=_positive(_expect(pp, "key_node_count", int, "preprocess", default=8), "preprocess.key_node_count"),
            stride=_positive(_expect(pp, "stride", int, "preprocess", default=1), "preprocess.stride"),
            neighborhood_depth=_positive(_expect(pp, "neighborhood_depth", int, "preprocess", default=2), "preprocess.neighborhood_depth"),
            ranking=ranking,
            theta_rule=theta_rule,
        )
    except ValueError as exc:
        raise ConfigError(f"preprocess: {exc}") from exc

    md = _expect(doc, "model", dict, "", default={}) or {}
    try:
        model = ModelConfig(
            filters=_positive(_expect(md, "filters", int, "model", default=8), "model.filters"),
            components=_positive(_expect(md, "components", int, "model", default=10), "model.components"),
            conv_channels=_positive(_expect(md, "conv_channels", int, "model", default=8), "model.conv_channels"),
            hidden_dim=_positive(_expect(md, "hidden_dim", int, "model", default=64), "model.hidden_dim"),
            sigma_min=_positive(_expect(md, "sigma_min", float, "model", default=1e-3), "model.sigma_min"),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    tr = _expect(doc, "train", dict, "", default={}) or {}
    loss = _expect(tr, "loss", str, "train", default="squared_error")
    if loss not in ("squared_error", "cross_entropy"):
        raise ConfigError("train.loss: must be 'squared_error' or 'cross_entropy'")
    try:
        train = TrainConfig(
            learning_rate=_positive(_expect(tr, "learning_rate", float, "train", default=0.01), "train.learning_rate"),
            epochs=_positive(_expect(tr, "epochs", int, "train", default=200), "train.epochs", strict=False),
            batch_size=_positive(_expect(tr, "batch_size", int, "train", default=16), "train.batch_size"),
            seed=_expect(tr, "seed", int, "train", default=0),
            loss=loss,
            sigma_lr_scale=_positive(_expect(tr, "sigma_lr_scale", float, "train", default=0.1), "train.sigma_lr_scale"),
        )
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc

    val_fraction = _expect(doc, "val_fraction", float, "", default=0.0)
    if not (0.0 <= val_fraction < 1.0):
        raise ConfigError(f"val_fraction: must be in [0, 1), got {val_fraction}")
    record_timing = _expect(doc, "record_timing", bool, "", default=False)

    return RunConfig(
        dataset=spec,
        preprocess=preprocess,
        model=model,
        train=train,
        val_fraction=val_fraction,
        record_timing=record_timing,
    )


def infer_tu_name(directory) -> str:
    """A TU directory holds exactly one ``{name}_A.txt``; return that name."""
    directory = Path(directory)
    candidates = sorted(directory.glob("*_A.txt"))
    if len(candidates) != 1:
        raise ConfigError(f"{directory}: expected exactly one *_A.txt file, found {len(candidates)}")
    return candidates[0].name[: -len("_A.txt")]


def load_dataset(spec: DatasetSpec) -> GraphDataset:
    """Materialize the configured dataset, one-hot encoded and ready to train on."""
    if spec.synthetic is not None:
        syn = spec.synthetic
        return generate_synthetic(syn["kind"], syn["per_class"], (syn["size_min"], syn["size_max"]), seed=syn["seed"])
    if spec.path is None:
        raise ConfigError("dataset: either 'synthetic' or 'path' is required")
    name = spec.name or infer_tu_name(spec.path)
    return one_hot_encode(parse_tu_dataset(spec.path, name))
