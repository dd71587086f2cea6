"""Checkpoint serialization: structured JSON text that round-trips all
parameters at full 64-bit precision (floats as shortest round-trip
decimals). save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

from .nn import Conv1dLayer, DenseLayer, ModelConfig, Network
from .dgcl import DgclLayer
from .preprocess import PreprocessConfig

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Raised when a checkpoint file is missing, truncated or inconsistent."""


def save_checkpoint(path, network: Network, run_config: dict | None = None) -> None:
    """Write the network (parameters in canonical order) plus metadata."""
    doc = {
        "format_version": FORMAT_VERSION,
        "run_config": run_config or {},
        "attr_dim": network.dgcl.attr_dim,
        "class_count": network.class_count,
        "preprocess": {
            "key_node_count": network.preprocess.key_node_count,
            "stride": network.preprocess.stride,
            "neighborhood_depth": network.preprocess.neighborhood_depth,
            "ranking": network.preprocess.ranking,
            "theta_rule": network.preprocess.theta_rule,
        },
        "model": {
            "filters": network.dgcl.n_filters,
            "components": network.dgcl.n_components,
            "conv_channels": network.conv.out_channels,
            "hidden_dim": network.hidden_dim,
            "sigma_min": network.dgcl.sigma_min,
        },
        "params": {
            "dgcl": {
                "weights": network.dgcl.weights.tolist(),
                "means": network.dgcl.means.tolist(),
                "sigmas": network.dgcl.sigmas.tolist(),
                "projections": network.dgcl.projections.tolist(),
                "biases": network.dgcl.biases.tolist(),
            },
            "conv": {"weights": network.conv.weights.tolist(), "bias": network.conv.bias.tolist()},
            "hidden": {"weights": network.hidden.weights.tolist(), "bias": network.hidden.bias.tolist()},
            "output": {"weights": network.output.weights.tolist(), "bias": network.output.bias.tolist()},
        },
    }
    with open(path, "w", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> tuple[Network, dict]:
    """Rebuild a Network from a checkpoint; returns (network, full document)."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"cannot parse checkpoint {path}: {exc}") from exc

    try:
        if doc["format_version"] != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format_version {doc['format_version']}")
        pp = doc["preprocess"]
        preprocess = PreprocessConfig(
            key_node_count=pp["key_node_count"],
            stride=pp["stride"],
            neighborhood_depth=pp["neighborhood_depth"],
            ranking=pp["ranking"],
            theta_rule=pp["theta_rule"],
        )
        params = doc["params"]
        dgcl = DgclLayer(
            weights=params["dgcl"]["weights"],
            means=params["dgcl"]["means"],
            sigmas=params["dgcl"]["sigmas"],
            projections=params["dgcl"]["projections"],
            biases=params["dgcl"]["biases"],
            sigma_min=doc["model"]["sigma_min"],
        )
        conv = Conv1dLayer(weights=params["conv"]["weights"], bias=params["conv"]["bias"])
        hidden = DenseLayer(weights=params["hidden"]["weights"], bias=params["hidden"]["bias"], activation="relu")
        output = DenseLayer(weights=params["output"]["weights"], bias=params["output"]["bias"], activation="identity")
        network = Network(
            dgcl=dgcl,
            conv=conv,
            hidden=hidden,
            output=output,
            preprocess=preprocess,
            class_count=doc["class_count"],
        )
        if network.dgcl.attr_dim != doc["attr_dim"]:
            raise CheckpointError(f"checkpoint attr_dim {doc['attr_dim']} does not match parameter shapes")
        return network, doc
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc


def model_config_from_checkpoint(doc: dict) -> ModelConfig:
    m = doc["model"]
    return ModelConfig(
        filters=m["filters"],
        components=m["components"],
        conv_channels=m["conv_channels"],
        hidden_dim=m["hidden_dim"],
        sigma_min=m["sigma_min"],
    )
