"""Command-line entry point: train | eval | retrieve | gradcheck | synth.

Exit codes: 0 success, 1 check failure (gradcheck tolerance exceeded),
2 usage/config/data errors, 3 runtime abort (NaN loss). All commands are
non-interactive and write only under the requested output directory or to
stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, DatasetSpec, RunConfig, infer_tu_name, load_dataset, load_run_config
from .data import DatasetError, generate_synthetic, one_hot_encode, parse_tu_dataset, stratified_folds, write_tu_dataset
from .gradcheck import run_gradcheck
from .nn import build_network
from .retrieval import extract_features, retrieve, write_retrieval_tsv
from .training import TrainingDivergedError, evaluate_classification, train, write_metrics_csv


def _split_validation(dataset, val_fraction: float, seed: int):
    if val_fraction <= 0.0:
        return dataset, None
    n_folds = max(2, round(1.0 / val_fraction))
    folds = stratified_folds(dataset, n_folds, seed=seed)
    val_idx = set(folds[0])
    train_idx = [i for i in range(len(dataset)) if i not in val_idx]
    return dataset.subset(train_idx), dataset.subset(sorted(val_idx))


def cmd_train(config_path: str, output_dir: str, seed: int | None = None, threads: int = 1) -> int:
    config = load_run_config(config_path)
    if seed is not None:
        config = replace(config, train=replace(config.train, seed=seed))

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    dataset = load_dataset(config.dataset)
    train_set, val_set = _split_validation(dataset, config.val_fraction, config.train.seed)
    network = build_network(config.model, config.preprocess, dataset.attr_dim, dataset.class_count, seed=config.train.seed)
    network, metrics = train(network, train_set, config.train, val_dataset=val_set, threads=threads)

    write_metrics_csv(out / "metrics.csv", metrics, include_timing=config.record_timing)
    save_checkpoint(out / "checkpoint.json", network, run_config=config.to_dict())
    elapsed = time.perf_counter() - started

    log_lines = [
        "resolved config:",
        json.dumps(config.to_dict(), indent=2, sort_keys=True),
        f"seed: {config.train.seed}",
        f"threads: {threads}",
        f"dataset: {dataset.name} ({len(dataset)} graphs, {dataset.class_count} classes, attr_dim {dataset.attr_dim})",
        f"train/val split: {len(train_set)}/{len(val_set) if val_set is not None else 0}",
        f"epochs completed: {len(metrics)}",
        f"total wall time: {elapsed:.3f}s",
    ]
    if metrics:
        log_lines.append(f"final mean_loss: {metrics[-1].mean_loss!r}")
        log_lines.append(f"final train_accuracy: {metrics[-1].train_accuracy!r}")
        log_lines.append(f"final val_accuracy: {metrics[-1].val_accuracy!r}")
    (out / "run.log").write_text("\n".join(log_lines) + "\n")
    return 0


def _load_eval_pair(checkpoint_path: str, data_path: str):
    network, doc = load_checkpoint(checkpoint_path)
    name = infer_tu_name(data_path)
    dataset = one_hot_encode(parse_tu_dataset(data_path, name))
    if dataset.attr_dim != doc["attr_dim"]:
        raise CheckpointError(
            f"dataset attr_dim {dataset.attr_dim} does not match checkpoint attr_dim {doc['attr_dim']}"
        )
    if dataset.class_count != doc["class_count"]:
        raise CheckpointError(
            f"dataset class_count {dataset.class_count} does not match checkpoint class_count {doc['class_count']}"
        )
    return network, dataset


def cmd_eval(checkpoint_path: str, data_path: str) -> int:
    network, dataset = _load_eval_pair(checkpoint_path, data_path)
    accuracy = evaluate_classification(network, dataset)
    print(f"accuracy={accuracy!r}")
    return 0


def cmd_retrieve(checkpoint_path: str, data_path: str, query_id: int, k: int) -> int:
    network, dataset = _load_eval_pair(checkpoint_path, data_path)
    features = extract_features(network, dataset)
    ranked = retrieve(query_id, features, k)
    write_retrieval_tsv(sys.stdout, query_id, ranked)
    return 0


def cmd_gradcheck(seed: int = 0, trials: int = 20, corrupt_group: str | None = None) -> int:
    report = run_gradcheck(seed=seed, trials=trials, corrupt_group=corrupt_group)
    for line in report.format_lines():
        print(line)
    return 0 if report.passed else 1


def cmd_synth(kind: str, per_class: int, out_dir: str, seed: int = 0, size_min: int = 6, size_max: int = 20) -> int:
    dataset = generate_synthetic(kind, per_class, (size_min, size_max), seed=seed)
    write_tu_dataset(dataset, out_dir, name=kind)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgcnn", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network and write metrics/checkpoint/log")
    p.add_argument("--config", required=True, help="JSON run configuration file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override train.seed from the config")
    p.add_argument("--threads", type=int, default=1, help="worker-count hint (results are identical for any value)")

    p = sub.add_parser("eval", help="print accuracy of a checkpoint on a TU dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="TU dataset directory")

    p = sub.add_parser("retrieve", help="rank graphs by feature similarity to a query")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="TU dataset directory")
    p.add_argument("--query", type=int, required=True, help="query graph id (dataset index)")
    p.add_argument("--k", type=int, required=True, help="number of results")

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)

    p = sub.add_parser("synth", help="write a synthetic dataset as TU text files")
    p.add_argument("--kind", required=True, choices=["cycles_vs_stars", "two_density"])
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size-min", type=int, default=6)
    p.add_argument("--size-max", type=int, default=20)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args.config, args.out, seed=args.seed, threads=args.threads)
        if args.command == "eval":
            return cmd_eval(args.checkpoint, args.data)
        if args.command == "retrieve":
            return cmd_retrieve(args.checkpoint, args.data, args.query, args.k)
        if args.command == "gradcheck":
            return cmd_gradcheck(seed=args.seed, trials=args.trials)
        if args.command == "synth":
            return cmd_synth(args.kind, getattr(args, "per_class"), args.out, seed=args.seed, size_min=args.size_min, size_max=args.size_max)
        raise AssertionError(f"unhandled command {args.command}")
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, DatasetError, CheckpointError, ValueError, KeyError, OSError) as exc:
        message = exc.args[0] if exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
