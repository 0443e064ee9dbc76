"""Training loops for graph and node classification.

Graph task: stratified k-fold cross validation repeated over several seeds,
minibatches built as disjoint unions. Node task: full-graph training on a
fixed train/test split, repeated over seeds. Both early-stop on validation
cross-entropy and restore the best weights before testing.

Metrics are plain JSON-able dicts::

    {"config": {...}, "per_fold": [...], "per_run": [...],
     "aggregate": {"mean", "std", "max_of_means", "max_of_folds", ...}}

Accuracies are fractions in [0, 1]. ``std`` is the sample standard
deviation (n - 1 denominator) of the per-run mean accuracies.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .data import (GraphDataset, NodeTask, batch_graphs, graph_features, kfold_split,
                   load_node_dataset, load_tu_dataset, node_task_batch, resolve_dataset,
                   stratified_holdout)
from .model import DegreeDict, EdGNNModel, ModelConfig, GRAPH_TASK, NODE_TASK

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    task: str = GRAPH_TASK
    dataset: str = "mutag"
    layers: int = 2
    hidden: int = 64
    lr: float = 1e-4
    weight_decay: float = 5e-4
    dropout: float = 0.0
    batch_size: int = 8
    max_epochs: int = 40
    patience: int = 5
    seed: int = 0
    runs: int = 10
    folds: int = 10
    val_fraction: float = 0.1
    emb: bool = False
    reg: bool = False
    optimizer: str = "adam"

    @classmethod
    def for_task(cls, task: str, **overrides) -> "TrainConfig":
        if task == GRAPH_TASK:
            base = cls()
        elif task == NODE_TASK:
            base = cls(task=NODE_TASK, lr=5e-3, weight_decay=0.0, dropout=0.5,
                       max_epochs=400, patience=20, folds=1)
        else:
            raise ValueError(f"unknown task {task!r}")
        return dataclasses.replace(base, **overrides)

    def __post_init__(self):
        for name in ("layers", "hidden", "batch_size", "max_epochs", "patience", "runs", "folds"):
            if getattr(self, name) < (0 if name == "layers" else 1):
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr < 0 or self.weight_decay < 0:
            raise ValueError("lr and weight_decay must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class Diverged(RuntimeError):
    pass


def _seed(*parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(p) for p in parts]))


def _check(loss: float, epoch: int):
    if not math.isfinite(loss):
        raise Diverged(f"non-finite loss {loss} at epoch {epoch}")


def _early_stopping_fit(model: EdGNNModel, config: TrainConfig, train_step, val_loss,
                        train_loss) -> dict:
    """Shared epoch loop. ``train_step(epoch)`` runs one epoch and returns the
    mean training loss; ``val_loss()`` evaluates the monitor. Weights from the
    best monitored epoch are restored before returning."""
    best, best_epoch, best_weights = math.inf, -1, model.get_weights()
    curve_train, curve_val = [], []
    stale = 0
    for epoch in range(config.max_epochs):
        tl = train_step(epoch)
        _check(tl, epoch)
        vl = val_loss() if val_loss is not None else train_loss()
        _check(vl, epoch)
        curve_train.append(tl)
        curve_val.append(vl)
        if vl < best:
            best, best_epoch, best_weights, stale = vl, epoch, model.get_weights(), 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    model.set_weights(best_weights)
    return {"best_epoch": best_epoch, "epochs_run": len(curve_train),
            "best_val_loss": best, "train_loss": curve_train, "val_loss": curve_val}


def _accuracy(logits: ad.Tensor, targets) -> float:
    targets = np.asarray(targets)
    if len(targets) == 0:
        return float("nan")
    return float(np.mean(logits.data.argmax(axis=1) == targets))


def _make_optimizer(model: EdGNNModel, config: TrainConfig) -> ad.Adam:
    if config.optimizer != "adam":
        raise ValueError(f"unsupported optimizer {config.optimizer!r}")
    return ad.Adam(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)


def fit_graph_fold(ds: GraphDataset, feats, fold, config: TrainConfig, run_seed: int,
                   fold_idx: int) -> tuple[EdGNNModel, dict]:
    graphs, y = ds.graphs, ds.graph_labels
    mc = ModelConfig(GRAPH_TASK, feats[0].shape[1] if feats else len(ds.node_label_dict),
                     len(ds.edge_label_dict), ds.num_classes, config.layers, config.hidden,
                     edge_mode="learned" if config.emb else "one_hot",
                     node_embedding_dim=config.hidden if config.emb else None)
    model = EdGNNModel(mc, seed=int(_seed(run_seed, fold_idx, 0).integers(2**31)))
    opt = _make_optimizer(model, config)
    rng = _seed(run_seed, fold_idx, 1)
    train = np.asarray(fold.train, dtype=np.int64)

    def batch(idx):
        return batch_graphs([graphs[i] for i in idx], [feats[i] for i in idx], y[idx])

    def loss_on(idx):
        b = batch(idx)
        return ad.softmax_cross_entropy(model.forward(b), b.targets).item()

    def train_step(epoch):
        order = train[rng.permutation(len(train))]
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            b = batch(idx)
            loss = ad.softmax_cross_entropy(model.forward(b, train=True, rng=rng), b.targets)
            ad.backward(loss)
            opt.step()
            total += loss.item() * len(idx)
        return total / max(len(order), 1)

    val = np.asarray(fold.validation, dtype=np.int64)
    record = _early_stopping_fit(model, config, train_step,
                                 (lambda: loss_on(val)) if len(val) else None,
                                 lambda: loss_on(train))
    test = np.asarray(fold.test, dtype=np.int64)
    b = batch(test)
    record["test_accuracy"] = _accuracy(model.forward(b), b.targets)
    return model, record


def train_graph_classifier(config: TrainConfig, dataset: GraphDataset | None = None) -> dict:
    """Repeated stratified k-fold cross validation of the graph classifier."""
    if dataset is None:
        dataset = load_tu_dataset(resolve_dataset(config.dataset, GRAPH_TASK))
    feats = graph_features(dataset)
    per_fold = []
    for run in range(config.runs):
        run_seed = config.seed + run
        plan = kfold_split(dataset.graph_labels, config.folds, run_seed, config.val_fraction)
        for fi, fold in enumerate(plan.folds):
            entry = {"run": run, "fold": fi, "seed": run_seed}
            try:
                _, rec = fit_graph_fold(dataset, feats, fold, config, run_seed, fi)
                entry.update(status="ok", **rec)
            except Diverged as exc:
                entry.update(status="diverged", error=str(exc), test_accuracy=None)
            log.info("run %d fold %d: %s acc=%s", run, fi, entry["status"], entry.get("test_accuracy"))
            per_fold.append(entry)
    return make_metrics(config, per_fold)


def fit_node_task(task: NodeTask, config: TrainConfig, run_seed: int,
                  degree_dict: DegreeDict | None = None) -> tuple[EdGNNModel, dict]:
    rng = _seed(run_seed, 0, 1)
    train_nodes, val_nodes = stratified_holdout(
        task.train_nodes, _label_lookup(task), config.val_fraction, rng)
    labels = _label_lookup(task)
    degree_dict = degree_dict or DegreeDict(task.graph.in_degrees())
    tr = node_task_batch(task, train_nodes, labels[train_nodes], degree_dict)
    mc = ModelConfig(NODE_TASK, tr.features.shape[1], len(task.graph.edge_label_dict),
                     task.num_classes, config.layers, config.hidden,
                     edge_mode="learned" if config.emb else "one_hot",
                     node_embedding_dim=config.hidden if config.emb else None,
                     dropout=config.dropout)
    model = EdGNNModel(mc, seed=int(_seed(run_seed, 0, 0).integers(2**31)))
    opt = _make_optimizer(model, config)

    def with_targets(nodes):
        return _retarget(tr, nodes, labels[nodes])

    val = with_targets(val_nodes) if len(val_nodes) else None

    def train_step(epoch):
        loss = ad.softmax_cross_entropy(model.forward(tr, train=True, rng=rng), tr.targets)
        ad.backward(loss)
        opt.step()
        return loss.item()

    def eval_loss(b):
        return ad.softmax_cross_entropy(model.forward(b), b.targets).item()

    record = _early_stopping_fit(model, config, train_step,
                                 (lambda: eval_loss(val)) if val is not None else None,
                                 lambda: eval_loss(tr))
    te = with_targets(task.test_nodes)
    record["test_accuracy"] = _accuracy(model.forward(te), te.targets)
    return model, record


def _label_lookup(task: NodeTask) -> np.ndarray:
    labels = np.full(task.graph.num_nodes, -1, dtype=np.int64)
    labels[task.train_nodes] = task.train_labels
    labels[task.test_nodes] = task.test_labels
    return labels


def _retarget(b, nodes, targets):
    return dataclasses.replace(b, target_nodes=np.asarray(nodes, dtype=np.int64),
                               targets=np.asarray(targets, dtype=np.int64))


def train_node_classifier(config: TrainConfig, task: NodeTask | None = None) -> dict:
    """Node classification on the fixed split, repeated over ``config.runs`` seeds.

    ``config.reg`` skips the reversed relations; ``config.emb`` learns node
    and edge embeddings instead of fixed one-hot encodings.
    """
    if task is None:
        task = load_node_dataset(resolve_dataset(config.dataset, NODE_TASK), reverse=not config.reg)
    per_fold = []
    for run in range(config.runs):
        run_seed = config.seed + run
        entry = {"run": run, "fold": 0, "seed": run_seed}
        try:
            _, rec = fit_node_task(task, config, run_seed)
            entry.update(status="ok", **rec)
        except Diverged as exc:
            entry.update(status="diverged", error=str(exc), test_accuracy=None)
        log.info("run %d: %s acc=%s", run, entry["status"], entry.get("test_accuracy"))
        per_fold.append(entry)
    return make_metrics(config, per_fold)


def aggregate(per_fold: list[dict]) -> tuple[list[dict], dict]:
    """Per-run means and the cross-run summary, recomputed from fold records.

    A run with any diverged fold counts as failed and is left out of the
    accuracy statistics.
    """
    runs: dict[int, list[dict]] = {}
    for rec in per_fold:
        runs.setdefault(rec["run"], []).append(rec)
    per_run = []
    for run in sorted(runs):
        recs = runs[run]
        ok = all(r["status"] == "ok" for r in recs)
        accs = [r["test_accuracy"] for r in recs if r["status"] == "ok"]
        per_run.append({
            "run": run,
            "seed": recs[0]["seed"],
            "status": "ok" if ok else "failed",
            "folds": len(recs),
            "mean_accuracy": float(np.mean(accs)) if ok and accs else None,
        })
    means = [r["mean_accuracy"] for r in per_run if r["status"] == "ok"]
    fold_accs = [r["test_accuracy"] for r in per_fold if r["status"] == "ok"]
    summary = {
        "runs": len(per_run),
        "failed_runs": sum(r["status"] != "ok" for r in per_run),
        "mean": float(np.mean(means)) if means else None,
        "std": float(np.std(means, ddof=1)) if len(means) > 1 else (0.0 if means else None),
        "max_of_means": float(np.max(means)) if means else None,
        "max_of_folds": float(np.max(fold_accs)) if fold_accs else None,
    }
    return per_run, summary


def make_metrics(config: TrainConfig, per_fold: list[dict]) -> dict:
    per_run, summary = aggregate(per_fold)
    return {"config": config.to_dict(), "per_fold": per_fold, "per_run": per_run,
            "aggregate": summary}


def dump_metrics(metrics: dict, path=None) -> str:
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
