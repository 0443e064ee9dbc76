"""The edGNN layer, feature initialisation, graph readout and classifier heads.

A layer maps node features ``F`` (``n x d_in``) to::

    relu(F W1 + (A F) W2 + S_in W3 + S_out W4)

where ``A`` sums over the both-direction neighbour multiset and ``S_in`` /
``S_out`` hold, per node, the summed embeddings of incoming / outgoing edge
labels. Edge embeddings never change across layers, so the two sums are
computed once per graph. With one-hot edge embeddings ``S_in[v, e]`` is the
number of edges into ``v`` labelled ``e``.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .graph import Graph, IN, OUT

ONE_HOT_LABEL = "one_hot_label"
ONE_HOT_IN_DEGREE = "one_hot_in_degree"
GRAPH_TASK, NODE_TASK = "graph", "node"

CHECKPOINT_MAGIC = b"EDGNNCKP"
CHECKPOINT_VERSION = 1


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out)) if fan_in + fan_out else 0.0
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class EdGNNLayer:
    W1: Tensor
    W2: Tensor
    W3: Tensor
    W4: Tensor

    def __post_init__(self):
        d_in, d_out = self.W1.shape
        d_e = self.W3.shape[0]
        if self.W2.shape != (d_in, d_out) or self.W3.shape != (d_e, d_out) or self.W4.shape != (d_e, d_out):
            raise ad.ShapeError(
                f"inconsistent layer shapes W1{self.W1.shape} W2{self.W2.shape} "
                f"W3{self.W3.shape} W4{self.W4.shape}")

    @classmethod
    def init(cls, d_in: int, d_out: int, d_edge: int, rng: np.random.Generator) -> "EdGNNLayer":
        return cls(
            ad.parameter(glorot_uniform(rng, d_in, d_out), "W1"),
            ad.parameter(glorot_uniform(rng, d_in, d_out), "W2"),
            ad.parameter(glorot_uniform(rng, d_edge, d_out), "W3"),
            ad.parameter(glorot_uniform(rng, d_edge, d_out), "W4"),
        )

    @property
    def d_in(self) -> int:
        return self.W1.shape[0]

    @property
    def d_out(self) -> int:
        return self.W1.shape[1]

    @property
    def d_edge(self) -> int:
        return self.W3.shape[0]

    def parameters(self) -> list[Tensor]:
        return [self.W1, self.W2, self.W3, self.W4]


class EdgeEmbeddingTable:
    """Edge-label embeddings, either fixed one-hot rows or a learned matrix."""

    def __init__(self, matrix: Tensor, mode: str):
        if mode not in ("one_hot", "learned"):
            raise ValueError(f"unknown edge embedding mode {mode!r}")
        self.matrix = matrix
        self.mode = mode

    @classmethod
    def one_hot(cls, num_labels: int) -> "EdgeEmbeddingTable":
        return cls(ad.constant(np.eye(num_labels)), "one_hot")

    @classmethod
    def learned(cls, num_labels: int, dim: int, rng: np.random.Generator) -> "EdgeEmbeddingTable":
        return cls(ad.parameter(glorot_uniform(rng, num_labels, dim), "edge_table"), "learned")

    @property
    def num_labels(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def parameters(self) -> list[Tensor]:
        return [self.matrix] if self.mode == "learned" else []


class DegreeDict:
    """Closed map from observed in-degrees to one-hot columns (ascending)."""

    def __init__(self, degrees):
        self.values = tuple(sorted({int(d) for d in degrees}))
        self._col = {d: i for i, d in enumerate(self.values)}

    def __len__(self):
        return len(self.values)

    def columns(self, degrees) -> np.ndarray:
        try:
            return np.array([self._col[int(d)] for d in degrees], dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"in-degree {exc.args[0]} was not seen when the dictionary was built") from None


def init_node_features(g: Graph, scheme: str = ONE_HOT_LABEL,
                       degree_dict: DegreeDict | None = None) -> np.ndarray:
    """One-hot input features.

    ``one_hot_label`` uses the (corpus-global) node-label dictionary of ``g``;
    ``one_hot_in_degree`` uses ``degree_dict`` or, if omitted, the in-degrees
    observed in ``g`` itself.
    """
    if scheme == ONE_HOT_LABEL:
        cols = g.node_labels
        width = len(g.node_label_dict)
    elif scheme == ONE_HOT_IN_DEGREE:
        degree_dict = degree_dict or DegreeDict(g.in_degrees())
        cols = degree_dict.columns(g.in_degrees())
        width = len(degree_dict)
    else:
        raise ValueError(f"unknown feature scheme {scheme!r}")
    X = np.zeros((g.num_nodes, width))
    X[np.arange(g.num_nodes), cols] = 1.0
    return X


def precompute_edge_sums(g: Graph | tuple[np.ndarray, np.ndarray],
                         table: EdgeEmbeddingTable) -> tuple[Tensor, Tensor]:
    """Per-node sums of incoming and outgoing edge embeddings.

    ``g`` may be a graph or a precomputed ``(in_counts, out_counts)`` pair.
    """
    if isinstance(g, Graph):
        c_in, c_out = g.label_counts(IN), g.label_counts(OUT)
    else:
        c_in, c_out = g
    if c_in.shape[1] != table.num_labels:
        raise ad.ShapeError(
            f"graph has {c_in.shape[1]} edge labels, table covers {table.num_labels}")
    if table.mode == "one_hot":
        return ad.constant(c_in), ad.constant(c_out)
    return ad.matmul(ad.constant(c_in), table.matrix), ad.matmul(ad.constant(c_out), table.matrix)


def _adjacency(g) -> sp.csr_matrix:
    return g.neighbor_matrix() if isinstance(g, Graph) else g


def layer_forward(layer: EdGNNLayer, g: Graph | sp.spmatrix, f_prev: Tensor,
                  S_in: Tensor, S_out: Tensor) -> Tensor:
    A = _adjacency(g)
    f_prev = ad.constant(f_prev)
    if f_prev.shape[1] != layer.d_in or S_in.shape[1] != layer.d_edge:
        raise ad.ShapeError(
            f"layer expects features of width {layer.d_in} and edge sums of width "
            f"{layer.d_edge}, got {f_prev.shape} and {S_in.shape}")
    return ad.relu(ad.add(
        f_prev @ layer.W1,
        ad.spmm(A, f_prev) @ layer.W2,
        S_in @ layer.W3,
        S_out @ layer.W4,
    ))


def layer_forward_concat(layer: EdGNNLayer, g: Graph | sp.spmatrix, f_prev: Tensor,
                         S_in: Tensor, S_out: Tensor) -> Tensor:
    """Same layer written as a node-labelled update: the edge sums are glued
    onto the node's own features and W1, W3, W4 stacked vertically."""
    A = _adjacency(g)
    f_prev = ad.constant(f_prev)
    f_y = ad.concat_cols([f_prev, S_in, S_out])
    W134 = ad.concat_rows([layer.W1, layer.W3, layer.W4])
    return ad.relu(ad.add(f_y @ W134, ad.spmm(A, f_prev) @ layer.W2))


def graph_readout(per_layer: Sequence[Tensor], segments, num_graphs: int) -> Tensor:
    """Concatenate, per graph, the node sums of the features of every layer
    (the input features included)."""
    rows = {t.shape[0] for t in per_layer}
    if len(rows) != 1 or len(segments) != next(iter(rows)):
        raise ad.ShapeError("feature matrices and segment ids cover different node sets")
    S = ad.segment_matrix(segments, num_graphs)
    return ad.concat_cols([ad.spmm(S, f) for f in per_layer])


@dataclass
class Batch:
    """Disjoint union of one or more graphs, ready for the model."""
    features: np.ndarray
    adjacency: sp.csr_matrix
    in_counts: np.ndarray
    out_counts: np.ndarray
    segments: np.ndarray
    num_graphs: int
    targets: np.ndarray | None = None
    target_nodes: np.ndarray | None = None

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]


@dataclass
class ModelConfig:
    task: str
    in_dim: int
    num_edge_labels: int
    num_classes: int
    layers: int = 2
    hidden: int = 64
    edge_mode: str = "one_hot"
    edge_dim: int | None = None
    node_embedding_dim: int | None = None
    dropout: float = 0.0

    def __post_init__(self):
        if self.task not in (GRAPH_TASK, NODE_TASK):
            raise ValueError(f"task must be 'graph' or 'node', not {self.task!r}")
        if self.edge_mode == "one_hot":
            self.edge_dim = self.num_edge_labels
        elif self.edge_dim is None:
            self.edge_dim = self.num_edge_labels


class EdGNNModel:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config
        if c.node_embedding_dim:
            self.node_embedding = ad.parameter(glorot_uniform(rng, c.in_dim, c.node_embedding_dim),
                                               "node_embedding")
            d0 = c.node_embedding_dim
        else:
            self.node_embedding = None
            d0 = c.in_dim
        if c.edge_mode == "one_hot":
            self.edge_table = EdgeEmbeddingTable.one_hot(c.num_edge_labels)
        else:
            self.edge_table = EdgeEmbeddingTable.learned(c.num_edge_labels, c.edge_dim, rng)
        dims = [d0] + [c.hidden] * c.layers
        self.layers = [EdGNNLayer.init(a, b, self.edge_table.dim, rng)
                       for a, b in zip(dims[:-1], dims[1:])]
        head_in = sum(dims) if c.task == GRAPH_TASK else dims[-1]
        self.classifier_W = ad.parameter(glorot_uniform(rng, head_in, c.num_classes), "classifier_W")
        self.classifier_b = ad.parameter(np.zeros((1, c.num_classes)), "classifier_b")

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].d_in if self.layers else self.classifier_W.shape[0]] + \
               [l.d_out for l in self.layers]

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        if self.node_embedding is not None:
            out.append(("node_embedding", self.node_embedding))
        if self.edge_table.mode == "learned":
            out.append(("edge_table", self.edge_table.matrix))
        for i, layer in enumerate(self.layers):
            for name, p in zip(("W1", "W2", "W3", "W4"), layer.parameters()):
                out.append((f"layer{i}.{name}", p))
        out += [("classifier_W", self.classifier_W), ("classifier_b", self.classifier_b)]
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def embed(self, batch: Batch, train: bool = False,
              rng: np.random.Generator | None = None) -> list[Tensor]:
        """Node features after every layer, input features first."""
        f = ad.constant(batch.features)
        if self.node_embedding is not None:
            f = f @ self.node_embedding
        S_in, S_out = precompute_edge_sums((batch.in_counts, batch.out_counts), self.edge_table)
        feats = [f]
        p = self.config.dropout if self.config.task == NODE_TASK else 0.0
        for layer in self.layers:
            f = layer_forward(layer, batch.adjacency, f, S_in, S_out)
            f = ad.dropout(f, p, train, rng)
            feats.append(f)
        return feats

    def forward(self, batch: Batch, train: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        feats = self.embed(batch, train, rng)
        if self.config.task == GRAPH_TASK:
            h = graph_readout(feats, batch.segments, batch.num_graphs)
        else:
            h = ad.take_rows(feats[-1], batch.target_nodes)
        return ad.add_bias(h @ self.classifier_W, self.classifier_b)

    def get_weights(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.parameters()]

    def set_weights(self, weights: Sequence[np.ndarray]):
        params = self.parameters()
        if len(weights) != len(params):
            raise ValueError(f"{len(weights)} arrays for {len(params)} parameters")
        for p, w in zip(params, weights):
            if w.shape != p.shape:
                raise ad.ShapeError(f"weight shape {w.shape} != parameter shape {p.shape}")
            p.data[...] = w

    def save(self, path):
        save_checkpoint(self, path)

    @classmethod
    def load(cls, path) -> "EdGNNModel":
        return load_checkpoint(path)


def save_checkpoint(model: EdGNNModel, path):
    """Write ``model`` to a single binary file.

    Layout (all integers little-endian)::

        bytes 0-7    magic b"EDGNNCKP"
        bytes 8-11   uint32 format version (1)
        bytes 12-15  uint32 header length H
        next H bytes UTF-8 JSON {"config": {...}, "tensors": [{"name", "shape"}, ...]}
        then         every tensor in header order, row-major float64 ('<f8')
    """
    named = model.named_parameters()
    header = json.dumps({
        "config": model.config.__dict__,
        "tensors": [{"name": n, "shape": list(p.shape)} for n, p in named],
    }, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<II", CHECKPOINT_VERSION, len(header)))
    buf.write(header)
    for _, p in named:
        buf.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> EdGNNModel:
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an edGNN checkpoint")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    model = EdGNNModel(ModelConfig(**header["config"]))
    named = dict(model.named_parameters())
    offset = 16 + hlen
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = shape[0] * shape[1] * 8
        arr = np.frombuffer(raw[offset:offset + size], dtype="<f8").reshape(shape)
        offset += size
        p = named[entry["name"]]
        if p.shape != shape:
            raise ValueError(f"{path}: tensor {entry['name']} has shape {shape}, expected {p.shape}")
        p.data[...] = arr
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    return model
