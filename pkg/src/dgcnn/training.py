"""Training loop, classification evaluation and cross-validation.

Receptive fields are computed once per (graph, preprocess config) and
cached. Training is shuffled mini-batch SGD with the batch gradient
averaged over examples; the reduction order is fixed by example index, so
results are bit-identical regardless of the worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import GraphDataset, stratified_folds
from .nn import ModelConfig, Network, TrainConfig, build_network, net_backward, net_forward, one_hot, sgd_apply, zero_gradients
from .preprocess import PreprocessConfig, ReceptiveFieldSet, build_receptive_fields


class TrainingDivergedError(RuntimeError):
    """Raised when the loss becomes NaN; names the epoch and batch."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"loss became NaN at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class Metrics:
    epoch: int
    mean_loss: float
    train_accuracy: float
    val_accuracy: float
    wall_time: float


METRICS_HEADER = "epoch,mean_loss,train_accuracy,val_accuracy,wall_time_s"


def write_metrics_csv(path, metrics: list[Metrics], include_timing: bool = False) -> None:
    """LF-terminated CSV, '.' decimal separator. Timing is written as 0.0
    unless requested, so identical runs produce identical bytes."""
    lines = [METRICS_HEADER + "\n"]
    for m in metrics:
        wall = m.wall_time if include_timing else 0.0
        lines.append(f"{m.epoch},{m.mean_loss!r},{m.train_accuracy!r},{m.val_accuracy!r},{wall!r}\n")
    with open(path, "w", newline="") as fh:
        fh.writelines(lines)


class ReceptiveFieldCache:
    """Memo of receptive-field sets keyed by (graph identity, preprocess config).

    The graph object is kept alive alongside its entry so identity keys can
    never be recycled.
    """

    def __init__(self):
        self._store: dict[tuple, tuple] = {}

    def get(self, dataset: GraphDataset, index: int, config: PreprocessConfig) -> ReceptiveFieldSet:
        graph = dataset.graphs[index].graph
        key = (id(graph), config.cache_key())
        hit = self._store.get(key)
        if hit is None:
            hit = (graph, build_receptive_fields(graph, config, graph_id=index))
            self._store[key] = hit
        return hit[1]

    def get_all(self, dataset: GraphDataset, config: PreprocessConfig) -> list[ReceptiveFieldSet]:
        return [self.get(dataset, i, config) for i in range(len(dataset))]


def _example_grad(network: Network, rf: ReceptiveFieldSet, target: np.ndarray, loss: str):
    probs, caches = net_forward(network, rf)
    loss_value, grads = net_backward(network, caches, target, loss=loss)
    return loss_value, grads


def train(
    network: Network,
    dataset: GraphDataset,
    config: TrainConfig,
    val_dataset: GraphDataset | None = None,
    threads: int = 1,
    rf_cache: ReceptiveFieldCache | None = None,
) -> tuple[Network, list[Metrics]]:
    """Run shuffled mini-batch SGD for ``config.epochs`` epochs (in place).

    Per-epoch metrics record the mean training loss, training accuracy and,
    when ``val_dataset`` is given, held-out accuracy (NaN otherwise).
    Deterministic given the seed, for any thread count.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    cache = rf_cache or ReceptiveFieldCache()
    rfs = cache.get_all(dataset, network.preprocess)
    targets = [one_hot(lg.class_label, network.class_count) for lg in dataset.graphs]
    val_rfs = cache.get_all(val_dataset, network.preprocess) if val_dataset is not None else None

    rates = config.learning_rates()
    rng = np.random.default_rng(config.seed)
    metrics: list[Metrics] = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for epoch in range(config.epochs):
            start = time.perf_counter()
            order = rng.permutation(len(dataset))
            loss_sum = 0.0
            for batch_no, batch_start in enumerate(range(0, len(order), config.batch_size)):
                batch = order[batch_start : batch_start + config.batch_size]
                jobs = [(rfs[i], targets[i]) for i in batch]
                if pool is not None:
                    results = list(pool.map(lambda job: _example_grad(network, job[0], job[1], config.loss), jobs))
                else:
                    results = [_example_grad(network, rf, t, config.loss) for rf, t in jobs]

                total = zero_gradients(network)
                batch_loss = 0.0
                for loss_value, grads in results:
                    batch_loss += loss_value
                    total.add_(grads)
                if np.isnan(batch_loss):
                    raise TrainingDivergedError(epoch=epoch, batch=batch_no)
                total.scale_(1.0 / len(batch))
                sgd_apply(network, total, rates)
                loss_sum += batch_loss

            train_acc = _accuracy(network, rfs, dataset.labels)
            val_acc = _accuracy(network, val_rfs, val_dataset.labels) if val_dataset is not None else float("nan")
            metrics.append(
                Metrics(
                    epoch=epoch,
                    mean_loss=loss_sum / len(dataset),
                    train_accuracy=train_acc,
                    val_accuracy=val_acc,
                    wall_time=time.perf_counter() - start,
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return network, metrics


def _accuracy(network: Network, rfs: list[ReceptiveFieldSet], labels: list[int]) -> float:
    correct = 0
    for rf, label in zip(rfs, labels):
        probs, _ = net_forward(network, rf)
        if int(np.argmax(probs)) == label:
            correct += 1
    return correct / len(labels)


def predict(network: Network, rf: ReceptiveFieldSet) -> int:
    """Argmax class; ties resolve to the lowest class index."""
    probs, _ = net_forward(network, rf)
    return int(np.argmax(probs))


def evaluate_classification(network: Network, dataset: GraphDataset, rf_cache: ReceptiveFieldCache | None = None) -> float:
    """Fraction of graphs whose argmax class matches the label."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    cache = rf_cache or ReceptiveFieldCache()
    rfs = cache.get_all(dataset, network.preprocess)
    return _accuracy(network, rfs, dataset.labels)


@dataclass
class CrossValResult:
    mean_accuracy: float
    std_accuracy: float
    fold_accuracies: list[float]


def cross_validate(
    dataset: GraphDataset,
    n_folds: int,
    preprocess: PreprocessConfig,
    model: ModelConfig,
    train_config: TrainConfig,
    seed: int = 0,
    threads: int = 1,
) -> CrossValResult:
    """Stratified k-fold cross-validation: train a fresh network per fold on
    the complement, evaluate on the fold. Reports mean and population std."""
    folds = stratified_folds(dataset, n_folds, seed=seed)
    accuracies = []
    for fold_no, fold in enumerate(folds):
        fold_set = set(fold)
        train_idx = [i for i in range(len(dataset)) if i not in fold_set]
        fold_seed = seed + fold_no
        network = build_network(model, preprocess, dataset.attr_dim, dataset.class_count, seed=fold_seed)
        fold_train_config = replace(train_config, seed=fold_seed)
        train(network, dataset.subset(train_idx), fold_train_config, threads=threads)
        accuracies.append(evaluate_classification(network, dataset.subset(fold)))
    arr = np.array(accuracies)
    return CrossValResult(mean_accuracy=float(arr.mean()), std_accuracy=float(arr.std()), fold_accuracies=accuracies)
