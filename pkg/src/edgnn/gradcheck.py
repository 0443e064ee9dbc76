"""Central finite-difference check of edGNN gradients.

The relative error of one entry is ``|analytic - numeric| / max(|analytic|,
|numeric|, floor)``; the floor keeps exact zeros (dead units, unused edge
labels) from dividing by zero. Points where some ReLU pre-activation sits
within ``kink`` of zero are rejected and the seed is redrawn, because a
finite step could cross the kink there.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .data import batch_graphs, gen_random_graph
from .graph import LabelDict
from .model import EdGNNModel, ModelConfig, init_node_features, GRAPH_TASK, NODE_TASK

STEP = 1e-5
TOLERANCE = 1e-4
FLOOR = 1e-6
KINK = 1e-3


@dataclass
class GradCheckResult:
    seed: int
    task: str
    max_rel_error: float
    worst_param: str
    num_entries: int
    attempts: int

    @property
    def ok(self) -> bool:
        return bool(self.max_rel_error < TOLERANCE)


def random_problem(seed: int, task: str = GRAPH_TASK, edge_mode: str = "one_hot",
                   node_embedding: bool = False):
    """A small random batch plus a freshly initialised 2-layer model."""
    rng = np.random.default_rng(seed)
    nd, ed = LabelDict(["a", "b", "c"]), LabelDict(["x", "y"])
    graphs = [gen_random_graph(int(rng.integers(3, 7)), 0.4, nd.labels, ed.labels,
                               seed=int(rng.integers(2**31)), node_label_dict=nd, edge_label_dict=ed)
              for _ in range(3)]
    feats = [init_node_features(g) for g in graphs]
    targets = rng.integers(0, 2, size=len(graphs))
    batch = batch_graphs(graphs, feats, targets)
    if task == NODE_TASK:
        batch.target_nodes = np.arange(batch.num_nodes)
        batch.targets = rng.integers(0, 2, size=batch.num_nodes)
    config = ModelConfig(task, len(nd), len(ed), 2, layers=2, hidden=5, edge_mode=edge_mode,
                         edge_dim=3, node_embedding_dim=4 if node_embedding else None)
    model = EdGNNModel(config, seed=seed)
    # larger layer weights keep pre-activations away from zero more often; a
    # small head keeps the logits O(1) so the loss is not saturated and
    # finite-difference round-off stays far below the tolerance
    for p in model.parameters():
        p.data *= 2.0
    model.classifier_W.data *= 0.05
    model.classifier_b.data[...] = np.random.default_rng(seed + 1).normal(0, 0.1, model.classifier_b.shape)
    return model, batch


def _min_preactivation(model: EdGNNModel, batch) -> float:
    feats = model.embed(batch)
    S_in, S_out = (ad.constant(batch.in_counts) @ model.edge_table.matrix,
                   ad.constant(batch.out_counts) @ model.edge_table.matrix)
    worst = np.inf
    for layer, f in zip(model.layers, feats[:-1]):
        pre = (f.data @ layer.W1.data + (batch.adjacency @ f.data) @ layer.W2.data
               + S_in.data @ layer.W3.data + S_out.data @ layer.W4.data)
        worst = min(worst, float(np.abs(pre).min()))
    return worst


def loss_of(model: EdGNNModel, batch) -> ad.Tensor:
    return ad.softmax_cross_entropy(model.forward(batch), batch.targets)


def check_gradients(model: EdGNNModel, batch, step: float = STEP) -> tuple[float, str, int]:
    params = model.named_parameters()
    grads = ad.backward(loss_of(model, batch), [p for _, p in params])
    worst, worst_name, count = 0.0, "", 0
    for (name, p), g in zip(params, grads):
        it = np.nditer(p.data, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = p.data[i]
            p.data[i] = orig + step
            up = loss_of(model, batch).item()
            p.data[i] = orig - step
            down = loss_of(model, batch).item()
            p.data[i] = orig
            num = (up - down) / (2 * step)
            rel = abs(g[i] - num) / max(abs(g[i]), abs(num), FLOOR)
            count += 1
            if rel > worst:
                worst, worst_name = rel, f"{name}{list(i)}"
    return float(worst), worst_name, count


def gradcheck(seed: int, task: str = GRAPH_TASK, edge_mode: str = "one_hot",
              node_embedding: bool = False, max_attempts: int = 50) -> GradCheckResult:
    for attempt in range(max_attempts):
        model, batch = random_problem(seed * 1000 + attempt, task, edge_mode, node_embedding)
        if _min_preactivation(model, batch) > KINK:
            worst, name, count = check_gradients(model, batch)
            return GradCheckResult(seed, task, worst, name, count, attempt + 1)
    raise RuntimeError(f"seed {seed}: no kink-free point in {max_attempts} draws")


def run_suite(seeds=range(20)) -> list[GradCheckResult]:
    """Graph and node heads over ``seeds``, alternating the embedding variants."""
    results = []
    for s in seeds:
        learned = s % 2 == 1
        results.append(gradcheck(s, GRAPH_TASK, "learned" if learned else "one_hot", learned))
        results.append(gradcheck(s, NODE_TASK, "learned" if learned else "one_hot", learned))
    return results
