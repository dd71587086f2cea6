"""Receptive-field construction: turn a graph into a fixed count of
variable-size, unordered neighborhoods.

Nodes are ranked by centrality, key nodes are picked at a stride along the
ranking, and each key node's k-hop neighborhood is collected by BFS with no
truncation or padding of its contents. Each entry carries a scalar theta
(0 for the key node, 1/hop-distance otherwise by default) and the node's
attribute vector. Graphs too small to supply all key nodes get empty pad
fields, which contribute only the filter bias downstream.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .data import Graph

PAD = -1

RANKINGS = ("degree", "weighted_degree")
THETA_RULES = ("inverse_hop", "edge_weight")


@dataclass(frozen=True)
class PreprocessConfig:
    key_node_count: int = 8
    stride: int = 1
    neighborhood_depth: int = 2
    ranking: str = "degree"
    theta_rule: str = "inverse_hop"

    def __post_init__(self):
        if self.key_node_count < 1:
            raise ValueError("key_node_count must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.neighborhood_depth < 1:
            raise ValueError("neighborhood_depth must be >= 1")
        if self.ranking not in RANKINGS:
            raise ValueError(f"ranking must be one of {RANKINGS}")
        if self.theta_rule not in THETA_RULES:
            raise ValueError(f"theta_rule must be one of {THETA_RULES}")

    def cache_key(self) -> tuple:
        return (self.key_node_count, self.stride, self.neighborhood_depth, self.ranking, self.theta_rule)


@dataclass
class Neighborhood:
    """One receptive field: the key node plus everything within k hops.

    ``nodes``, ``thetas`` and ``attrs`` are parallel arrays ordered by
    (hop distance, node index); the first entry is the key node with
    theta 0. A pad field has ``key_node == PAD`` and zero entries.
    """

    key_node: int
    nodes: np.ndarray
    thetas: np.ndarray
    attrs: np.ndarray

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def is_pad(self) -> bool:
        return self.key_node == PAD

    def entries(self) -> list[tuple[int, float, np.ndarray]]:
        return [(int(n), float(t), a) for n, t, a in zip(self.nodes, self.thetas, self.attrs)]


@dataclass
class ReceptiveFieldSet:
    """Exactly ``w`` neighborhoods for one graph, in key-node ranking order."""

    fields: list[Neighborhood]
    source_graph_id: int = -1
    _packed: tuple | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.fields)

    def packed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Concatenated (thetas, attrs, field_index) across all fields."""
        if self._packed is None:
            thetas = np.concatenate([f.thetas for f in self.fields]) if self.fields else np.zeros(0)
            attrs = np.vstack([f.attrs for f in self.fields]) if self.fields else np.zeros((0, 0))
            index = np.concatenate([np.full(f.size, j, dtype=np.int64) for j, f in enumerate(self.fields)]) if self.fields else np.zeros(0, dtype=np.int64)
            self._packed = (thetas, attrs, index)
        return self._packed


def rank_nodes(graph: Graph, ranking: str = "degree") -> list[int]:
    """Order nodes by descending centrality, ties broken by ascending index."""
    if graph.node_count == 0:
        raise ValueError("cannot rank nodes of an empty graph")
    if ranking == "degree":
        scores = graph.degrees
    elif ranking == "weighted_degree":
        scores = graph.weighted_degrees
    else:
        raise ValueError(f"ranking must be one of {RANKINGS}")
    return sorted(range(graph.node_count), key=lambda u: (-scores[u], u))


def select_key_nodes(ranked: list[int], w: int, s: int) -> list[int]:
    """Take every s-th node from the ranking until w are selected.

    When the ranking runs out first, the sequence is padded with ``PAD``.
    """
    if w < 1 or s < 1:
        raise ValueError("w and s must be >= 1")
    keys = list(ranked[:: s][:w])
    keys.extend([PAD] * (w - len(keys)))
    return keys


def _bfs_hops(graph: Graph, source: int, max_depth: int) -> dict[int, int]:
    hops = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if hops[u] == max_depth:
            continue
        for v in graph.adjacency[u]:
            if v not in hops:
                hops[v] = hops[u] + 1
                queue.append(v)
    return hops


def assemble_neighborhood(graph: Graph, key: int, config: PreprocessConfig) -> Neighborhood:
    """Collect every node within ``neighborhood_depth`` hops of ``key``.

    No truncation, no padding: the field keeps whatever size the graph
    dictates. Entries are ordered by (hop, node index) for reproducibility
    only; downstream sums are order-independent.
    """
    d = graph.attr_dim
    if key == PAD:
        return Neighborhood(key_node=PAD, nodes=np.zeros(0, dtype=np.int64), thetas=np.zeros(0), attrs=np.zeros((0, d)))
    if not (0 <= key < graph.node_count):
        raise ValueError(f"key node {key} outside [0, {graph.node_count})")
    if graph.node_attrs is None:
        raise ValueError("graph has no node attributes; encode them first")

    hops = _bfs_hops(graph, key, config.neighborhood_depth)
    members = sorted(hops.items(), key=lambda item: (item[1], item[0]))
    nodes = np.array([node for node, _ in members], dtype=np.int64)
    thetas = np.zeros(len(members))
    for i, (node, hop) in enumerate(members):
        if hop == 0:
            thetas[i] = 0.0
        elif config.theta_rule == "edge_weight" and hop == 1:
            thetas[i] = graph.edge_weight(key, node)
        else:
            thetas[i] = 1.0 / hop
    return Neighborhood(key_node=key, nodes=nodes, thetas=thetas, attrs=graph.node_attrs[nodes])


def build_receptive_fields(graph: Graph, config: PreprocessConfig, graph_id: int = -1) -> ReceptiveFieldSet:
    """Rank, select and assemble: the full preprocessing pipeline for one graph."""
    ranked = rank_nodes(graph, config.ranking)
    keys = select_key_nodes(ranked, config.key_node_count, config.stride)
    fields = [assemble_neighborhood(graph, key, config) for key in keys]
    return ReceptiveFieldSet(fields=fields, source_graph_id=graph_id)


RF_CACHE_MAGIC = "dgcnn-rfcache"
RF_CACHE_VERSION = 1


def save_rf_cache(path, rf_sets: list[ReceptiveFieldSet]) -> None:
    """Write receptive-field sets to a plain-text cache file.

    Layout: a header line ``dgcnn-rfcache <version> <n_graphs>``; then per
    graph one line ``graph <id> <w>`` followed by ``w`` neighborhood blocks,
    each a line ``field <key> <entry_count>`` and one line per entry holding
    ``node theta attr_0 ... attr_{d-1}`` (floats as shortest round-trip
    decimals).
    """
    lines = [f"{RF_CACHE_MAGIC} {RF_CACHE_VERSION} {len(rf_sets)}\n"]
    for rf in rf_sets:
        lines.append(f"graph {rf.source_graph_id} {len(rf.fields)}\n")
        for f in rf.fields:
            lines.append(f"field {f.key_node} {f.size}\n")
            for node, theta, attrs in zip(f.nodes, f.thetas, f.attrs):
                attr_text = " ".join(repr(float(a)) for a in attrs)
                lines.append(f"{int(node)} {float(theta)!r} {attr_text}\n".rstrip() + "\n")
    with open(path, "w") as fh:
        fh.writelines(lines)


def load_rf_cache(path, attr_dim: int) -> list[ReceptiveFieldSet]:
    """Read a cache file written by :func:`save_rf_cache`."""
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines:
        raise ValueError("empty receptive-field cache file")
    header = lines[0].split()
    if len(header) != 3 or header[0] != RF_CACHE_MAGIC or int(header[1]) != RF_CACHE_VERSION:
        raise ValueError(f"bad cache header: {lines[0]!r}")
    n_graphs = int(header[2])

    pos = 1
    rf_sets = []
    for _ in range(n_graphs):
        tag, gid, w = lines[pos].split()
        if tag != "graph":
            raise ValueError(f"expected graph record at line {pos + 1}")
        pos += 1
        fields = []
        for _ in range(int(w)):
            tag, key, count = lines[pos].split()
            if tag != "field":
                raise ValueError(f"expected field record at line {pos + 1}")
            pos += 1
            nodes, thetas, attrs = [], [], []
            for _ in range(int(count)):
                parts = lines[pos].split()
                nodes.append(int(parts[0]))
                thetas.append(float(parts[1]))
                attrs.append([float(p) for p in parts[2:]])
                pos += 1
            fields.append(
                Neighborhood(
                    key_node=int(key),
                    nodes=np.array(nodes, dtype=np.int64),
                    thetas=np.array(thetas, dtype=np.float64),
                    attrs=np.array(attrs, dtype=np.float64).reshape(len(nodes), attr_dim) if nodes else np.zeros((0, attr_dim)),
                )
            )
        rf_sets.append(ReceptiveFieldSet(fields=fields, source_graph_id=int(gid)))
    return rf_sets
