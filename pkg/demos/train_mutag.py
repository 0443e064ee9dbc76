"""
Graph classification on MUTAG
=============================

A short run of the cross-validation harness: three folds, one seed. The
full recipe (ten seeds of ten folds) is ``edgnn train-graph --dataset mutag``
and takes a few minutes on one core.
"""
import numpy as np

from edgnn.data import load_tu_dataset, resolve_dataset
from edgnn.train import TrainConfig, train_graph_classifier

ds = load_tu_dataset(resolve_dataset("mutag", "graph"))
print(ds.statistics())

config = TrainConfig.for_task("graph", runs=1, folds=3)
metrics = train_graph_classifier(config, ds)

for rec in metrics["per_fold"]:
    print(f"fold {rec['fold']}: best epoch {rec['best_epoch']} of {rec['epochs_run']}, "
          f"test accuracy {rec['test_accuracy']:.3f}")
print("mean accuracy:", np.round(metrics["aggregate"]["mean"], 3))
