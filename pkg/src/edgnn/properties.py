"""Executable checks relating edGNN layers to WL colour refinement.

Each check draws a random graph and random weights, runs ``T`` layers and the
directed edge-labelled WL refinement side by side, and compares them:

* :func:`wl_equal_rows_check` - vertices with equal colour after ``t``
  rounds must get equal embeddings after ``t`` layers.
* :func:`partition_match_check` - with wide random layers the embedding
  partition usually equals the colour partition exactly.
* :func:`concat_form_check` - the layer computed with stacked weights on
  concatenated inputs agrees with the four-term form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import gen_random_graph
from .graph import Graph, LabelDict
from .model import (EdGNNLayer, EdgeEmbeddingTable, glorot_uniform, init_node_features,
                    layer_forward, layer_forward_concat, precompute_edge_sums)
from .wl import DIRECTED_LABELED, Coloring, initial_coloring, same_partition, wl_step

NODE_LABELS = ("a", "b", "c")
EDGE_LABELS = ("x", "y", "z")


def random_labeled_graph(rng: np.random.Generator, max_nodes: int) -> Graph:
    n = int(rng.integers(1, max_nodes + 1))
    k = int(rng.integers(1, len(NODE_LABELS) + 1))
    e = int(rng.integers(1, len(EDGE_LABELS) + 1))
    return gen_random_graph(n, float(rng.uniform(0.05, 0.5)), NODE_LABELS[:k], EDGE_LABELS[:e],
                            seed=int(rng.integers(2**31)),
                            node_label_dict=LabelDict(NODE_LABELS).freeze(),
                            edge_label_dict=LabelDict(EDGE_LABELS).freeze())


def embeddings(g: Graph, layers, f0: np.ndarray, table: EdgeEmbeddingTable) -> list[np.ndarray]:
    S_in, S_out = precompute_edge_sums(g, table)
    feats = [ad.constant(f0)]
    for layer in layers:
        feats.append(layer_forward(layer, g, feats[-1], S_in, S_out))
    return [f.data for f in feats]


def wl_colorings(g: Graph, steps: int) -> list[Coloring]:
    cs = [initial_coloring(g)]
    for _ in range(steps):
        cs.append(wl_step(g, cs[-1], DIRECTED_LABELED))
    return cs


def _gaussian_layer(rng, d_in, d_out, d_e) -> EdGNNLayer:
    return EdGNNLayer(*(ad.parameter(rng.normal(size=s)) for s in
                        ((d_in, d_out), (d_in, d_out), (d_e, d_out), (d_e, d_out))))


@dataclass
class WLEqualResult:
    num_nodes: int
    pairs_checked: int
    max_gap: float
    violations: list = field(default_factory=list)


def wl_equal_rows_check(seed: int, max_nodes: int = 15, steps: int = 3, width: int = 8,
                        tol: float = 1e-8) -> WLEqualResult:
    """Every pair of vertices sharing a colour at round ``t`` must have
    embeddings within ``tol`` (max norm) after ``t`` layers.

    Input features are an arbitrary injective-or-not image of the node labels
    and the edge table is random, so the check covers any initial colouring
    consistent with the labels.
    """
    rng = np.random.default_rng(seed)
    g = random_labeled_graph(rng, max_nodes)
    d0 = int(rng.integers(1, 6))
    f0 = init_node_features(g) @ rng.normal(size=(len(NODE_LABELS), d0))
    d_e = int(rng.integers(1, 5))
    table = EdgeEmbeddingTable(ad.parameter(rng.normal(size=(len(EDGE_LABELS), d_e))), "learned")
    dims = [d0] + [width] * steps
    layers = [_gaussian_layer(rng, a, b, d_e) for a, b in zip(dims[:-1], dims[1:])]
    feats = embeddings(g, layers, f0, table)
    colors = wl_colorings(g, steps)
    res = WLEqualResult(g.num_nodes, 0, 0.0)
    for t in range(steps + 1):
        for members in colors[t].classes():
            block = feats[t][members]
            gap = float(np.abs(block - block[0]).max()) if len(members) > 1 else 0.0
            res.pairs_checked += len(members) * (len(members) - 1) // 2
            res.max_gap = max(res.max_gap, gap)
            if gap >= tol:
                res.violations.append((t, members, gap))
    return res


def rounded_partition(f: np.ndarray, resolution: float = 1e-6) -> Coloring:
    keys = [tuple(r) for r in np.round(f / resolution).astype(np.int64).tolist()]
    table = {k: i for i, k in enumerate(dict.fromkeys(keys))}
    return Coloring(tuple(table[k] for k in keys), len(table))


@dataclass
class PartitionMatchResult:
    seed: int
    num_nodes: int
    matched: bool
    first_mismatch: int | None
    wl_classes: list[int]
    embedding_classes: list[int]


def partition_match_check(seed: int, max_nodes: int = 12, steps: int = 3, width: int = 64,
                          resolution: float = 1e-6) -> PartitionMatchResult:
    """Compare, at every round ``t <= steps``, the partition obtained by
    rounding the layer-``t`` embeddings with the WL colour partition.

    Uses one-hot node and edge features and Glorot-initialised layers of
    ``width`` units.
    """
    rng = np.random.default_rng(seed)
    g = random_labeled_graph(rng, max_nodes)
    table = EdgeEmbeddingTable.one_hot(len(EDGE_LABELS))
    dims = [len(NODE_LABELS)] + [width] * steps
    layers = [EdGNNLayer.init(a, b, table.dim, rng) for a, b in zip(dims[:-1], dims[1:])]
    feats = embeddings(g, layers, init_node_features(g), table)
    colors = wl_colorings(g, steps)
    parts = [rounded_partition(f, resolution) for f in feats]
    mismatch = next((t for t in range(steps + 1) if not same_partition(parts[t], colors[t])), None)
    return PartitionMatchResult(seed, g.num_nodes, mismatch is None, mismatch,
                                [c.num_colors for c in colors], [p.num_colors for p in parts])


def concat_form_check(seed: int, max_nodes: int = 15) -> float:
    """Max elementwise difference between the two layer forms for one random
    graph, random shapes and random weights."""
    rng = np.random.default_rng(seed)
    g = random_labeled_graph(rng, max_nodes)
    d_in, d_out, d_e = (int(x) for x in rng.integers(1, 9, size=3))
    f = ad.constant(rng.normal(size=(g.num_nodes, d_in)))
    if rng.random() < 0.5:
        table = EdgeEmbeddingTable.one_hot(len(EDGE_LABELS))
        d_e = table.dim
    else:
        table = EdgeEmbeddingTable(ad.parameter(rng.normal(size=(len(EDGE_LABELS), d_e))), "learned")
    layer = EdGNNLayer(*(ad.parameter(glorot_uniform(rng, a, d_out) * 3)
                         for a in (d_in, d_in, d_e, d_e)))
    S_in, S_out = precompute_edge_sums(g, table)
    a = layer_forward(layer, g, f, S_in, S_out).data
    b = layer_forward_concat(layer, g, f, S_in, S_out).data
    return float(np.abs(a - b).max()) if a.size else 0.0
