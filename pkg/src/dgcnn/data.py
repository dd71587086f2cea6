"""Graph data model, TU-format text ingestion, one-hot attribute encoding,
synthetic dataset generation and stratified fold splitting.

The on-disk format is the multi-file plain-text convention used by the
common graph classification benchmarks: ``{name}_A.txt`` (comma-separated
1-indexed edge pairs), ``{name}_graph_indicator.txt`` (one 1-indexed graph
id per node line), ``{name}_graph_labels.txt`` (one integer per graph),
plus optional ``{name}_node_labels.txt`` and ``{name}_edge_labels.txt``.
Nodes are 1-indexed on disk and 0-indexed in memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class DatasetError(Exception):
    """Raised for malformed or inconsistent dataset files."""


@dataclass
class Graph:
    """An undirected simple graph with optional node labels/attributes.

    Edges are 0-indexed ``(u, v)`` pairs with ``u != v``; duplicates are
    rejected (loaders collapse them before construction). ``edge_weights``,
    when present, aligns with ``edges`` and must be positive.
    """

    node_count: int
    edges: list[tuple[int, int]]
    node_labels: list[int] | None = None
    node_attrs: np.ndarray | None = None
    edge_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.node_count < 0:
            raise ValueError("node_count must be non-negative")
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValueError(f"edge ({u}, {v}) has endpoint outside [0, {self.node_count})")
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add(key)
        if self.node_labels is not None and len(self.node_labels) != self.node_count:
            raise ValueError("node_labels length must equal node_count")
        if self.node_attrs is not None:
            self.node_attrs = np.asarray(self.node_attrs, dtype=np.float64)
            if self.node_attrs.ndim != 2 or self.node_attrs.shape[0] != self.node_count or self.node_attrs.shape[1] < 1:
                raise ValueError("node_attrs must be a (node_count, d) array with d >= 1")
        if self.edge_weights is not None:
            self.edge_weights = np.asarray(self.edge_weights, dtype=np.float64)
            if self.edge_weights.shape != (len(self.edges),):
                raise ValueError("edge_weights must align with edges")
            if np.any(self.edge_weights <= 0):
                raise ValueError("edge_weights must be positive")

    @property
    def attr_dim(self) -> int:
        return 0 if self.node_attrs is None else self.node_attrs.shape[1]

    @cached_property
    def adjacency(self) -> list[list[int]]:
        """Sorted neighbor lists, one per node."""
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for lst in adj:
            lst.sort()
        return adj

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    @cached_property
    def weighted_degrees(self) -> np.ndarray:
        """Sum of incident edge weights (weight 1.0 when unweighted)."""
        wd = np.zeros(self.node_count, dtype=np.float64)
        weights = self.edge_weights if self.edge_weights is not None else np.ones(len(self.edges))
        for (u, v), w in zip(self.edges, weights):
            wd[u] += w
            wd[v] += w
        return wd

    def edge_weight(self, u: int, v: int) -> float:
        return self._weight_map[(min(u, v), max(u, v))]

    @cached_property
    def _weight_map(self) -> dict[tuple[int, int], float]:
        weights = self.edge_weights if self.edge_weights is not None else np.ones(len(self.edges))
        return {(min(u, v), max(u, v)): float(w) for (u, v), w in zip(self.edges, weights)}


@dataclass
class LabeledGraph:
    graph: Graph
    class_label: int


@dataclass
class GraphDataset:
    """A list of labeled graphs with a shared class count and attribute dim.

    ``attr_dim == 0`` means node attributes have not been encoded yet.
    """

    graphs: list[LabeledGraph] = field(default_factory=list)
    class_count: int = 2
    attr_dim: int = 0
    name: str = ""

    def __post_init__(self):
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        for i, lg in enumerate(self.graphs):
            if not (0 <= lg.class_label < self.class_count):
                raise ValueError(f"graph {i} has class_label {lg.class_label} outside [0, {self.class_count})")
            if self.attr_dim and lg.graph.attr_dim != self.attr_dim:
                raise ValueError(f"graph {i} has attr_dim {lg.graph.attr_dim}, expected {self.attr_dim}")

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def labels(self) -> list[int]:
        return [lg.class_label for lg in self.graphs]

    def subset(self, indices) -> "GraphDataset":
        return GraphDataset(
            graphs=[self.graphs[i] for i in indices],
            class_count=self.class_count,
            attr_dim=self.attr_dim,
            name=self.name,
        )


def _read_int_lines(path: Path, n_columns: int) -> list[tuple[int, ...]]:
    rows = []
    with path.open("r") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != n_columns:
                raise DatasetError(f"{path.name}:{lineno}: expected {n_columns} comma-separated fields, got {len(parts)}")
            try:
                rows.append(tuple(int(p) for p in parts))
            except ValueError:
                raise DatasetError(f"{path.name}:{lineno}: non-integer token in {line!r}") from None
    return rows


def parse_tu_dataset(directory_path: str | Path, name: str) -> GraphDataset:
    """Load a TU-style text dataset from ``directory_path``.

    Nodes are re-indexed per graph (0-based, in on-disk order), graph labels
    are remapped to contiguous ``[0, B)`` by ascending value, duplicate
    undirected edges are collapsed and self-loops dropped. Nodes get label 0
    when no node-label file exists; edge labels, when present, are read as
    per-edge weights.
    """
    directory = Path(directory_path)
    paths = {key: directory / f"{name}_{key}.txt" for key in ("A", "graph_indicator", "graph_labels", "node_labels", "edge_labels")}
    for key in ("A", "graph_indicator", "graph_labels"):
        if not paths[key].is_file():
            raise DatasetError(f"missing file: {paths[key].name}")

    edge_rows = _read_int_lines(paths["A"], 2)
    indicator = [row[0] for row in _read_int_lines(paths["graph_indicator"], 1)]
    graph_labels = [row[0] for row in _read_int_lines(paths["graph_labels"], 1)]
    node_labels = None
    if paths["node_labels"].is_file():
        node_labels = [row[0] for row in _read_int_lines(paths["node_labels"], 1)]
        if len(node_labels) != len(indicator):
            raise DatasetError(f"{paths['node_labels'].name}: {len(node_labels)} lines but indicator has {len(indicator)}")
    edge_labels = None
    if paths["edge_labels"].is_file():
        edge_labels = [row[0] for row in _read_int_lines(paths["edge_labels"], 1)]
        if len(edge_labels) != len(edge_rows):
            raise DatasetError(f"{paths['edge_labels'].name}: {len(edge_labels)} lines but {len(edge_rows)} edges")

    n_nodes = len(indicator)
    n_graphs = len(graph_labels)
    for lineno, gid in enumerate(indicator, start=1):
        if not (1 <= gid <= n_graphs):
            raise DatasetError(f"{paths['graph_indicator'].name}:{lineno}: graph id {gid} outside [1, {n_graphs}]")

    # Global node id -> (graph id, local index), local ids in on-disk order.
    local_index = np.zeros(n_nodes, dtype=np.int64)
    counts = [0] * n_graphs
    for node, gid in enumerate(indicator):
        local_index[node] = counts[gid - 1]
        counts[gid - 1] += 1

    per_graph_edges: list[dict[tuple[int, int], float]] = [dict() for _ in range(n_graphs)]
    for lineno, (u, v) in enumerate(edge_rows, start=1):
        if not (1 <= u <= n_nodes and 1 <= v <= n_nodes):
            raise DatasetError(f"inconsistent indicator: {paths['A'].name}:{lineno}: node id outside [1, {n_nodes}]")
        gu, gv = indicator[u - 1], indicator[v - 1]
        if gu != gv:
            raise DatasetError(f"inconsistent indicator: {paths['A'].name}:{lineno}: edge ({u}, {v}) crosses graphs {gu} and {gv}")
        if u == v:
            continue
        lu, lv = int(local_index[u - 1]), int(local_index[v - 1])
        key = (min(lu, lv), max(lu, lv))
        weight = float(edge_labels[lineno - 1]) if edge_labels is not None else 1.0
        per_graph_edges[gu - 1].setdefault(key, weight)

    label_values = sorted(set(graph_labels))
    label_map = {lab: i for i, lab in enumerate(label_values)}

    per_graph_labels: list[list[int]] = [[] for _ in range(n_graphs)]
    for node, gid in enumerate(indicator):
        per_graph_labels[gid - 1].append(node_labels[node] if node_labels is not None else 0)

    graphs = []
    for g in range(n_graphs):
        edge_items = sorted(per_graph_edges[g].items())
        graph = Graph(
            node_count=counts[g],
            edges=[e for e, _ in edge_items],
            node_labels=per_graph_labels[g],
            edge_weights=np.array([w for _, w in edge_items]) if edge_labels is not None and edge_items else None,
        )
        graphs.append(LabeledGraph(graph=graph, class_label=label_map[graph_labels[g]]))

    return GraphDataset(graphs=graphs, class_count=max(2, len(label_values)), attr_dim=0, name=name)


def write_tu_dataset(dataset: GraphDataset, directory_path: str | Path, name: str | None = None) -> None:
    """Write ``dataset`` back out as TU-style text files (inverse of parsing)."""
    directory = Path(directory_path)
    directory.mkdir(parents=True, exist_ok=True)
    name = name or dataset.name or "dataset"

    offsets = []
    total = 0
    for lg in dataset.graphs:
        offsets.append(total)
        total += lg.graph.node_count

    has_weights = any(lg.graph.edge_weights is not None for lg in dataset.graphs)
    a_lines, indicator_lines, label_lines, node_label_lines, edge_label_lines = [], [], [], [], []
    for gid, lg in enumerate(dataset.graphs, start=1):
        g = lg.graph
        label_lines.append(f"{lg.class_label}\n")
        for local in range(g.node_count):
            indicator_lines.append(f"{gid}\n")
            node_label_lines.append(f"{g.node_labels[local] if g.node_labels is not None else 0}\n")
        weights = g.edge_weights if g.edge_weights is not None else np.ones(len(g.edges))
        for (u, v), w in zip(g.edges, weights):
            a, b = sorted((u, v))
            a_lines.append(f"{offsets[gid - 1] + a + 1}, {offsets[gid - 1] + b + 1}\n")
            if has_weights:
                edge_label_lines.append(f"{int(w)}\n")

    (directory / f"{name}_A.txt").write_text("".join(a_lines))
    (directory / f"{name}_graph_indicator.txt").write_text("".join(indicator_lines))
    (directory / f"{name}_graph_labels.txt").write_text("".join(label_lines))
    (directory / f"{name}_node_labels.txt").write_text("".join(node_label_lines))
    if has_weights:
        (directory / f"{name}_edge_labels.txt").write_text("".join(edge_label_lines))


def one_hot_encode(dataset: GraphDataset) -> GraphDataset:
    """One-hot encode node labels into attribute vectors.

    The distinct labels across the whole dataset, sorted ascending, index the
    one-hot block. Pre-existing attributes are appended after that block.
    """
    labels = set()
    for lg in dataset.graphs:
        if lg.graph.node_labels is None:
            raise ValueError("every graph needs node_labels before one-hot encoding")
        labels.update(lg.graph.node_labels)
    index = {lab: i for i, lab in enumerate(sorted(labels))}
    dim = len(index)

    graphs = []
    for lg in dataset.graphs:
        g = lg.graph
        onehot = np.zeros((g.node_count, dim))
        for node, lab in enumerate(g.node_labels):
            onehot[node, index[lab]] = 1.0
        attrs = onehot if g.node_attrs is None else np.hstack([onehot, g.node_attrs])
        graphs.append(
            LabeledGraph(
                graph=Graph(
                    node_count=g.node_count,
                    edges=list(g.edges),
                    node_labels=list(g.node_labels),
                    node_attrs=attrs,
                    edge_weights=None if g.edge_weights is None else g.edge_weights.copy(),
                ),
                class_label=lg.class_label,
            )
        )
    return GraphDataset(graphs=graphs, class_count=dataset.class_count, attr_dim=dim + (dataset.attr_dim or 0), name=dataset.name)


def _degree_bucket_labels(graph: Graph) -> list[int]:
    # Buckets: degree <= 1, exactly 2, >= 3.
    return [0 if d <= 1 else (1 if d == 2 else 2) for d in graph.degrees]


def _cycle_graph(n: int) -> Graph:
    return Graph(node_count=n, edges=[(i, (i + 1) % n) for i in range(n)])


def _star_graph(n: int) -> Graph:
    return Graph(node_count=n, edges=[(0, i) for i in range(1, n)])


def _erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return Graph(node_count=n, edges=edges)


def generate_synthetic(
    kind: str,
    per_class: int,
    size_range: tuple[int, int] = (6, 20),
    seed: int = 0,
) -> GraphDataset:
    """Generate a two-class synthetic dataset, already one-hot encoded.

    ``cycles_vs_stars`` emits class-0 cycles and class-1 stars; ``two_density``
    emits sparse (p=0.2) vs dense (p=0.5) random graphs. Nodes are labeled by
    degree bucket and encoded; sizes are drawn uniformly from ``size_range``.
    """
    lo, hi = size_range
    if lo < 4 or hi < lo:
        raise ValueError(f"invalid size_range {size_range}: need 4 <= min <= max")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if kind not in ("cycles_vs_stars", "two_density"):
        raise ValueError(f"unknown synthetic kind {kind!r}")

    rng = np.random.default_rng(seed)
    graphs = []
    for class_label in (0, 1):
        for _ in range(per_class):
            n = int(rng.integers(lo, hi + 1))
            if kind == "cycles_vs_stars":
                g = _cycle_graph(n) if class_label == 0 else _star_graph(n)
            else:
                g = _erdos_renyi(n, 0.2 if class_label == 0 else 0.5, rng)
            g = Graph(node_count=g.node_count, edges=g.edges, node_labels=_degree_bucket_labels(g))
            graphs.append(LabeledGraph(graph=g, class_label=class_label))

    dataset = GraphDataset(graphs=graphs, class_count=2, attr_dim=0, name=kind)
    return one_hot_encode(dataset)


def stratified_folds(dataset: GraphDataset, n_folds: int, seed: int = 0) -> list[list[int]]:
    """Partition graph indices into ``n_folds`` class-stratified folds.

    Per-class counts across folds differ by at most 1. Deterministic given
    the seed.
    """
    if n_folds < 2:
        raise ValueError("n_folds must be >= 2")
    by_class: dict[int, list[int]] = {}
    for i, lg in enumerate(dataset.graphs):
        by_class.setdefault(lg.class_label, []).append(i)
    for label, members in sorted(by_class.items()):
        if len(members) < n_folds:
            raise ValueError(f"stratification error: class {label} has {len(members)} graphs, fewer than n_folds={n_folds}")

    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for label in sorted(by_class):
        members = np.array(by_class[label])
        rng.shuffle(members)
        for pos, idx in enumerate(members):
            folds[pos % n_folds].append(int(idx))
    for f in folds:
        f.sort()
    return folds
