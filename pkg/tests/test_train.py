import math

import numpy as np
import pytest

from edgnn.data import GraphDataset, NodeTask, kfold_split, node_task_batch
from edgnn.graph import LabelDict, build_graph, reverse_augment
from edgnn.model import EdGNNModel, ModelConfig
from edgnn.train import (TrainConfig, Diverged, _accuracy, _early_stopping_fit, aggregate,
                         fit_graph_fold, graph_features, make_metrics,
                         train_graph_classifier, train_node_classifier)


def test_defaults():
    g = TrainConfig.for_task("graph")
    assert (g.layers, g.hidden, g.lr, g.weight_decay, g.batch_size, g.max_epochs) == \
        (2, 64, 1e-4, 5e-4, 8, 40)
    n = TrainConfig.for_task("node")
    assert (n.layers, n.hidden, n.lr, n.weight_decay, n.dropout, n.max_epochs) == \
        (2, 64, 5e-3, 0.0, 0.5, 400)
    with pytest.raises(ValueError):
        TrainConfig(hidden=0)
    with pytest.raises(ValueError):
        TrainConfig.for_task("edge")


def small_cfg(**kw):
    base = dict(runs=1, folds=3, max_epochs=4, patience=2, hidden=8)
    base.update(kw)
    return TrainConfig.for_task("graph", **base)


def test_lr_zero_changes_nothing(mutag):
    feats = graph_features(mutag)
    fold = kfold_split(mutag.graph_labels, 10, 0).folds[0]
    cfg = small_cfg(lr=0.0, max_epochs=5, patience=10)
    model, rec = fit_graph_fold(mutag, feats, fold, cfg, 0, 0)
    # one epoch with lr 0 leaves the initial weights in place
    fresh, _ = fit_graph_fold(mutag, feats, fold, small_cfg(lr=0.0, max_epochs=1), 0, 0)
    assert all(np.array_equal(a, b) for a, b in zip(model.get_weights(), fresh.get_weights()))
    assert len(set(rec["val_loss"])) == 1
    assert rec["best_epoch"] == 0


def test_identical_single_class_graphs():
    g = build_graph(3, ["C", "C", "O"], [(0, 1, "s"), (1, 0, "s"), (1, 2, "d"), (2, 1, "d")])
    n, e, c = g.node_label_dict, g.edge_label_dict, LabelDict(["1"]).freeze()
    ds = GraphDataset("same", [g] * 12, np.zeros(12, dtype=np.int64), c, n, e)
    m = train_graph_classifier(small_cfg(folds=3), ds)
    assert m["aggregate"]["mean"] == 1.0


def test_early_stopping_restores_best():
    model = EdGNNModel(ModelConfig("graph", 2, 1, 2, hidden=3), 0)
    losses = iter([3.0, 2.0, 1.0, 1.5, 1.2, 1.1, 0.5])

    def step(epoch):
        model.classifier_b.data[...] = epoch
        return 1.0

    rec = _early_stopping_fit(model, TrainConfig(max_epochs=10, patience=3), step,
                              lambda: next(losses), None)
    assert rec["best_epoch"] == 2 and rec["epochs_run"] == 6
    assert rec["best_epoch"] == int(np.argmin(rec["val_loss"]))
    assert np.all(model.classifier_b.data == 2)


def test_divergence_raises():
    model = EdGNNModel(ModelConfig("graph", 2, 1, 2, hidden=3), 0)
    with pytest.raises(Diverged):
        _early_stopping_fit(model, TrainConfig(), lambda e: math.nan, None, lambda: 1.0)


def test_failed_runs_excluded():
    per_fold = [
        {"run": 0, "fold": 0, "seed": 0, "status": "ok", "test_accuracy": 0.8},
        {"run": 0, "fold": 1, "seed": 0, "status": "ok", "test_accuracy": 0.6},
        {"run": 1, "fold": 0, "seed": 1, "status": "diverged", "test_accuracy": None},
        {"run": 1, "fold": 1, "seed": 1, "status": "ok", "test_accuracy": 1.0},
        {"run": 2, "fold": 0, "seed": 2, "status": "ok", "test_accuracy": 0.9},
        {"run": 2, "fold": 1, "seed": 2, "status": "ok", "test_accuracy": 0.9},
    ]
    per_run, s = aggregate(per_fold)
    assert [r["status"] for r in per_run] == ["ok", "failed", "ok"]
    assert s["failed_runs"] == 1 and s["runs"] == 3
    assert s["mean"] == pytest.approx(0.8)
    assert s["std"] == pytest.approx(np.std([0.7, 0.9], ddof=1))
    assert s["max_of_means"] == pytest.approx(0.9)
    assert s["max_of_folds"] == 1.0


def test_graph_training_learns_something(mutag):
    m = train_graph_classifier(small_cfg(max_epochs=6, hidden=16, lr=1e-2), mutag)
    assert len(m["per_fold"]) == 3
    assert m["aggregate"]["mean"] > 0.6
    for rec in m["per_fold"]:
        assert rec["best_epoch"] == int(np.argmin(rec["val_loss"]))


def toy_node_task():
    # two communities, labelled by which hub they point to
    edges = [(i, 0, "r") for i in range(2, 12)] + [(i, 1, "r") for i in range(12, 22)]
    edges += [(i, i + 1, "s") for i in range(2, 11)]
    g = reverse_augment(build_graph(22, [""] * 22, edges))
    nodes = np.arange(2, 22)
    labels = (nodes >= 12).astype(np.int64)
    train = np.r_[2:9, 12:19]
    test = np.r_[9:12, 19:22]
    ents = LabelDict([str(i) for i in range(22)]).freeze()
    cls = LabelDict(["a", "b"]).freeze()
    return NodeTask("toy", g, train, labels[train - 2], test, labels[test - 2], cls, ents, True)


def test_node_training_runs():
    task = toy_node_task()
    cfg = TrainConfig.for_task("node", runs=2, max_epochs=30, hidden=8)
    m = train_node_classifier(cfg, task)
    assert m["aggregate"]["runs"] == 2
    assert all(r["status"] == "ok" for r in m["per_fold"])
    assert 0.0 <= m["aggregate"]["mean"] <= 1.0


def test_majority_constant_model():
    task = toy_node_task()
    cfg = ModelConfig("node", 1, len(task.graph.edge_label_dict), 2, hidden=3)
    model = EdGNNModel(cfg, 0)
    model.classifier_W.data[...] = 0
    model.classifier_b.data[...] = [[1.0, 0.0]]
    b = node_task_batch(task, [9], [0])
    b.features = np.ones((task.graph.num_nodes, 1))
    assert _accuracy(model.forward(b), b.targets) == 1.0


def test_node_training_deterministic():
    task = toy_node_task()
    cfg = TrainConfig.for_task("node", runs=1, max_epochs=10, hidden=8)
    assert train_node_classifier(cfg, task) == train_node_classifier(cfg, task)


def test_metrics_schema(mutag):
    m = make_metrics(small_cfg(), [{"run": 0, "fold": 0, "seed": 0, "status": "ok", "test_accuracy": 0.5}])
    assert set(m) == {"config", "per_fold", "per_run", "aggregate"}
    assert {"mean", "std", "max_of_means", "max_of_folds"} <= set(m["aggregate"])
