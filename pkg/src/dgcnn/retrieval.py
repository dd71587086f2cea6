"""Graph feature extraction and similarity retrieval.

The post-ReLU activations of the dense hidden layer serve as a graph's
feature vector; retrieval ranks all other graphs by cosine similarity
(Euclidean distance available behind a flag) and precision@k scores the
fraction of top-k results sharing the query's class label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import GraphDataset
from .nn import Network, net_forward
from .training import ReceptiveFieldCache


@dataclass
class FeatureVector:
    graph_id: int
    values: np.ndarray


def extract_features(network: Network, dataset: GraphDataset, rf_cache: ReceptiveFieldCache | None = None) -> list[FeatureVector]:
    """One hidden-layer activation vector per graph, in dataset order."""
    cache = rf_cache or ReceptiveFieldCache()
    features = []
    for i in range(len(dataset)):
        rf = cache.get(dataset, i, network.preprocess)
        _, caches = net_forward(network, rf)
        features.append(FeatureVector(graph_id=i, values=caches.hidden_out.copy()))
    return features


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between a and b; zero vectors score 0."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def retrieve(query_id: int, features: list[FeatureVector], k: int, metric: str = "cosine") -> list[tuple[int, float]]:
    """Top-k non-query graphs by descending score, ties by ascending id.

    Cosine scores are similarities; the Euclidean metric scores by negated
    distance so that descending order still means nearest first.
    """
    by_id = {fv.graph_id: fv.values for fv in features}
    if query_id not in by_id:
        raise KeyError(f"unknown query graph id {query_id}")
    if not (1 <= k <= len(features) - 1):
        raise ValueError(f"k must be in [1, {len(features) - 1}], got {k}")
    if metric not in ("cosine", "euclidean"):
        raise ValueError("metric must be 'cosine' or 'euclidean'")

    query = by_id[query_id]
    scored = []
    for fv in features:
        if fv.graph_id == query_id:
            continue
        if metric == "cosine":
            score = cosine_similarity(query, fv.values)
        else:
            score = -float(np.linalg.norm(query - fv.values))
        scored.append((fv.graph_id, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def precision_at_k(ranked: list[tuple[int, float]], query_label: int, labels: list[int], k: int) -> float:
    """Fraction of the top-k results whose class label matches the query's."""
    if k > len(ranked):
        raise ValueError(f"k={k} exceeds ranking length {len(ranked)}")
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for gid, _ in ranked[:k] if labels[gid] == query_label)
    return hits / k


def write_retrieval_tsv(stream, query_id: int, ranked: list[tuple[int, float]]) -> None:
    """`query_id<TAB>rank<TAB>graph_id<TAB>score`, one row per result."""
    for rank, (gid, score) in enumerate(ranked, start=1):
        stream.write(f"{query_id}\t{rank}\t{gid}\t{score!r}\n")
