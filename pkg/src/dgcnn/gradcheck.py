"""End-to-end gradient verification against the finite-difference oracle.

Each trial builds a small random network and receptive-field set, computes
the analytic gradient of the scalar loss for every parameter, and compares
it with central finite differences over the flattened parameter vector.
Tolerance rule, applied component-wise: relative error <= rel_tol when the
gradient magnitude is at least ``small``, absolute error <= abs_tol below
that.

Trials where a ReLU pre-activation sits within ``kink_margin`` of zero are
redrawn: the loss is not differentiable at a kink, so the comparison would
be meaningless there, not wrong.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Graph
from .gmm import finite_diff_grad
from .nn import (
    ModelConfig,
    Network,
    build_network,
    grads_to_vector,
    loss_and_grad,
    net_backward,
    net_forward,
    param_group_slices,
    params_to_vector,
    vector_to_params,
)
from .preprocess import PreprocessConfig, build_receptive_fields
from . import nn as _nn

GROUP_NAMES = tuple(name for name, _, _ in _nn.PARAM_GROUPS)


@dataclass
class GroupStats:
    max_rel: float = 0.0       # worst relative error where |grad| >= small
    max_abs_small: float = 0.0  # worst absolute error where |grad| < small
    count: int = 0

    def update(self, analytic: np.ndarray, numeric: np.ndarray, small: float) -> None:
        denom = np.maximum(np.abs(analytic), np.abs(numeric))
        err = np.abs(analytic - numeric)
        big = denom >= small
        if np.any(big):
            self.max_rel = max(self.max_rel, float((err[big] / denom[big]).max()))
        if np.any(~big):
            self.max_abs_small = max(self.max_abs_small, float(err[~big].max()))
        self.count += analytic.size


@dataclass
class GradcheckReport:
    trials: int
    rel_tol: float
    abs_tol: float
    groups: dict[str, GroupStats] = field(default_factory=dict)
    elapsed: float = 0.0

    def failing_groups(self) -> list[str]:
        return [
            name
            for name, stats in self.groups.items()
            if stats.max_rel > self.rel_tol or stats.max_abs_small > self.abs_tol
        ]

    @property
    def passed(self) -> bool:
        return not self.failing_groups()

    def format_lines(self) -> list[str]:
        lines = []
        for name, stats in self.groups.items():
            verdict = "ok" if stats.max_rel <= self.rel_tol and stats.max_abs_small <= self.abs_tol else "FAIL"
            lines.append(
                f"{name:<12} max_rel={stats.max_rel:.3e}  max_abs_small={stats.max_abs_small:.3e}  "
                f"n={stats.count}  {verdict}"
            )
        lines.append(f"trials={self.trials} elapsed={self.elapsed:.2f}s " + ("PASS" if self.passed else "FAIL: " + ", ".join(self.failing_groups())))
        return lines


def _random_graph(rng: np.random.Generator, attr_dim: int) -> Graph:
    n = int(rng.integers(4, 11))
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.5]
    if not edges:
        edges = [(0, 1)]
    return Graph(node_count=n, edges=edges, node_attrs=rng.normal(size=(n, attr_dim)))


def _randomize_parameters(network: Network, rng: np.random.Generator) -> None:
    network.dgcl.weights[:] = rng.uniform(-2.0, 2.0, network.dgcl.weights.shape)
    network.dgcl.means[:] = rng.uniform(-1.0, 2.0, network.dgcl.means.shape)
    network.dgcl.sigmas[:] = rng.uniform(0.3, 2.0, network.dgcl.sigmas.shape)
    network.dgcl.projections[:] = rng.uniform(-1.0, 1.0, network.dgcl.projections.shape)
    network.dgcl.biases[:] = rng.uniform(-0.5, 0.5, network.dgcl.biases.shape)
    network.conv.weights[:] = rng.uniform(-1.0, 1.0, network.conv.weights.shape)
    network.conv.bias[:] = rng.uniform(-0.5, 0.5, network.conv.bias.shape)
    network.hidden.weights[:] = rng.uniform(-1.0, 1.0, network.hidden.weights.shape)
    network.hidden.bias[:] = rng.uniform(-0.5, 0.5, network.hidden.bias.shape)
    network.output.weights[:] = rng.uniform(-1.0, 1.0, network.output.weights.shape)
    network.output.bias[:] = rng.uniform(-0.5, 0.5, network.output.bias.shape)


def _draw_trial(rng: np.random.Generator, kink_margin: float):
    """Random tiny network + receptive fields, redrawn until no ReLU
    pre-activation sits inside the kink margin."""
    for _ in range(100):
        attr_dim = int(rng.integers(1, 4))
        preprocess = PreprocessConfig(
            key_node_count=int(rng.integers(5, 8)),
            stride=int(rng.integers(1, 3)),
            neighborhood_depth=int(rng.integers(1, 3)),
        )
        model = ModelConfig(
            filters=int(rng.integers(1, 4)),
            components=int(rng.integers(1, 4)),
            conv_channels=int(rng.integers(1, 3)),
            hidden_dim=int(rng.integers(2, 5)),
        )
        class_count = int(rng.integers(2, 4))
        network = build_network(model, preprocess, attr_dim, class_count, seed=int(rng.integers(0, 2**31)))
        _randomize_parameters(network, rng)
        graph = _random_graph(rng, attr_dim)
        rf = build_receptive_fields(graph, preprocess)
        target = np.zeros(class_count)
        target[int(rng.integers(0, class_count))] = 1.0

        _, caches = net_forward(network, rf)
        margin = min(np.abs(caches.conv_cache.pre).min(), np.abs(caches.hidden_cache.pre).min())
        if margin > kink_margin:
            return network, rf, target
    raise RuntimeError("could not draw a trial clear of ReLU kinks")


def _corrupt(grads_vec: np.ndarray, slices: dict[str, slice], group: str) -> None:
    # Negative-control hook: damage one group's analytic gradient so the
    # oracle must flag exactly that group.
    grads_vec[slices[group]] *= 1.5


def run_gradcheck(
    seed: int = 0,
    trials: int = 20,
    h: float = 1e-5,
    rel_tol: float = 1e-4,
    abs_tol: float = 1e-7,
    small: float = 1e-3,
    loss: str = "squared_error",
    corrupt_group: str | None = None,
    kink_margin: float = 1e-3,
) -> GradcheckReport:
    """Compare analytic and finite-difference gradients over random trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if corrupt_group is not None and corrupt_group not in GROUP_NAMES:
        raise ValueError(f"unknown parameter group {corrupt_group!r}")
    rng = np.random.default_rng(seed)
    report = GradcheckReport(trials=trials, rel_tol=rel_tol, abs_tol=abs_tol, groups={name: GroupStats() for name in GROUP_NAMES})

    start = time.perf_counter()
    for _ in range(trials):
        network, rf, target = _draw_trial(rng, kink_margin)
        _, caches = net_forward(network, rf)
        _, grads = net_backward(network, caches, target, loss=loss)
        analytic = grads_to_vector(grads)
        slices = param_group_slices(network)
        if corrupt_group is not None:
            _corrupt(analytic, slices, corrupt_group)

        probe = network.copy()

        def loss_at(vec: np.ndarray) -> float:
            vector_to_params(probe, vec)
            probs, _ = net_forward(probe, rf)
            value, _ = loss_and_grad(probs, target, kind=loss)
            return value

        numeric = finite_diff_grad(loss_at, params_to_vector(network), h=h)
        for name in GROUP_NAMES:
            report.groups[name].update(analytic[slices[name]], numeric[slices[name]], small)

    report.elapsed = time.perf_counter() - start
    return report
