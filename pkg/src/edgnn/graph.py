"""Directed multigraphs with categorical node and edge labels.

Graphs are immutable once built. Node ids are dense ``0..n-1``; raw labels
(strings) are mapped to compact ids through :class:`LabelDict` objects that
may be shared by every graph of a corpus, so that one-hot widths agree.

Parallel edges and self-loops are allowed. Neighbourhoods are multisets with
one entry per incident edge endpoint: a self-loop ``(v, v)`` puts ``v`` once
in the in-neighbourhood and once in the out-neighbourhood.
"""
from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

IN, OUT, BOTH = "in", "out", "both"


class GraphError(ValueError):
    pass


class LabelDict:
    """Bidirectional map between raw label strings and compact ids.

    Ids are handed out in first-seen order. A frozen dictionary refuses new
    labels, which is how corpora are "closed" after loading.
    """

    def __init__(self, labels: Iterable[str] = ()):
        self._to_id: dict[str, int] = {}
        self._to_label: list[str] = []
        self.frozen = False
        for label in labels:
            self.add(label)

    def add(self, label) -> int:
        label = str(label)
        idx = self._to_id.get(label)
        if idx is None:
            if self.frozen:
                raise KeyError(f"unknown label {label!r} (dictionary is closed)")
            idx = len(self._to_label)
            self._to_id[label] = idx
            self._to_label.append(label)
        return idx

    def freeze(self) -> "LabelDict":
        self.frozen = True
        return self

    def id(self, label) -> int:
        return self._to_id[str(label)]

    def label(self, idx: int) -> str:
        return self._to_label[idx]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._to_label)

    def __contains__(self, label) -> bool:
        return str(label) in self._to_id

    def __len__(self) -> int:
        return len(self._to_label)

    def __iter__(self):
        return iter(self._to_label)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelDict) and self._to_label == other._to_label

    def __repr__(self) -> str:
        return f"LabelDict({self._to_label!r})"


def _frozen(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


def _incidence(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """CSR-style grouping of edge indices by endpoint, edges in ascending order."""
    order = np.argsort(keys, kind="stable")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=indptr[1:])
    return _frozen(indptr), _frozen(order)


class Graph:
    """Immutable directed edge-labelled multigraph.

    ``src``, ``dst`` and ``edge_labels`` are parallel int arrays in edge-list
    order; ``node_labels`` holds one label id per node. ``in_ptr/in_idx`` and
    ``out_ptr/out_idx`` index the incident edges of every node.
    """

    __slots__ = (
        "num_nodes", "src", "dst", "edge_labels", "node_labels",
        "node_label_dict", "edge_label_dict",
        "in_ptr", "in_idx", "out_ptr", "out_idx", "_cache",
    )

    def __init__(self, num_nodes, src, dst, edge_labels, node_labels,
                 node_label_dict: LabelDict, edge_label_dict: LabelDict):
        num_nodes = int(num_nodes)
        src, dst = _frozen(src), _frozen(dst)
        edge_labels, node_labels = _frozen(edge_labels), _frozen(node_labels)
        if num_nodes < 0:
            raise GraphError("num_nodes must be non-negative")
        if not (len(src) == len(dst) == len(edge_labels)):
            raise GraphError("src, dst and edge_labels must have equal length")
        if len(node_labels) != num_nodes:
            raise GraphError(
                f"expected {num_nodes} node labels, got {len(node_labels)}")
        bad = np.flatnonzero((src < 0) | (src >= num_nodes) | (dst < 0) | (dst >= num_nodes))
        if len(bad):
            i = int(bad[0])
            raise GraphError(
                f"edge {i} ({src[i]}, {dst[i]}) has an endpoint outside [0, {num_nodes})")
        if len(edge_labels) and not (0 <= edge_labels.min() and edge_labels.max() < len(edge_label_dict)):
            raise GraphError("edge label id outside the edge dictionary")
        if num_nodes and not (0 <= node_labels.min() and node_labels.max() < len(node_label_dict)):
            raise GraphError("node label id outside the node dictionary")

        self.num_nodes = num_nodes
        self.src, self.dst = src, dst
        self.edge_labels, self.node_labels = edge_labels, node_labels
        self.node_label_dict, self.edge_label_dict = node_label_dict, edge_label_dict
        self.in_ptr, self.in_idx = _incidence(dst, num_nodes)
        self.out_ptr, self.out_idx = _incidence(src, num_nodes)
        self._cache = {}

    def __setattr__(self, name, value):
        if hasattr(self, "_cache") and name != "_cache":
            raise AttributeError("Graph is immutable")
        object.__setattr__(self, name, value)

    @property
    def num_edges(self) -> int:
        return len(self.src)

    def edges(self) -> list[tuple[int, int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist(), self.edge_labels.tolist()))

    def raw_node_labels(self) -> list[str]:
        return [self.node_label_dict.label(i) for i in self.node_labels.tolist()]

    def raw_edges(self) -> list[tuple[int, int, str]]:
        lab = self.edge_label_dict.label
        return [(u, v, lab(e)) for u, v, e in self.edges()]

    def _check_node(self, v: int):
        if not 0 <= v < self.num_nodes:
            raise IndexError(f"node {v} out of range [0, {self.num_nodes})")

    def in_edges(self, v: int) -> np.ndarray:
        self._check_node(v)
        return self.in_idx[self.in_ptr[v]:self.in_ptr[v + 1]]

    def out_edges(self, v: int) -> np.ndarray:
        self._check_node(v)
        return self.out_idx[self.out_ptr[v]:self.out_ptr[v + 1]]

    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_ptr)

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_ptr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.edge_labels, other.edge_labels)
            and np.array_equal(self.node_labels, other.node_labels)
            and self.node_label_dict == other.node_label_dict
            and self.edge_label_dict == other.edge_label_dict
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Graph(num_nodes={self.num_nodes}, num_edges={self.num_edges})"

    def neighbor_matrix(self) -> sp.csr_matrix:
        """Sparse ``n x n`` count matrix ``A`` with ``(A @ X)[v]`` summing ``X``
        over the both-direction neighbour multiset of ``v``."""
        A = self._cache.get("neighbors")
        if A is None:
            n = self.num_nodes
            rows = np.concatenate([self.dst, self.src])
            cols = np.concatenate([self.src, self.dst])
            A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
            A.sum_duplicates()
            A.sort_indices()
            self._cache["neighbors"] = A
        return A

    def label_counts(self, direction: str) -> np.ndarray:
        """Dense ``n x |edge labels|`` matrix of incident-edge counts per label."""
        key = "counts_" + direction
        C = self._cache.get(key)
        if C is None:
            if direction not in (IN, OUT):
                raise ValueError(f"direction must be 'in' or 'out', not {direction!r}")
            ends = self.dst if direction == IN else self.src
            C = np.zeros((self.num_nodes, len(self.edge_label_dict)))
            np.add.at(C, (ends, self.edge_labels), 1.0)
            C.setflags(write=False)
            self._cache[key] = C
        return C


def build_graph(num_nodes: int, node_labels: Sequence, edges: Iterable,
                node_label_dict: LabelDict | None = None,
                edge_label_dict: LabelDict | None = None) -> Graph:
    """Build a graph from raw labels.

    ``edges`` is an iterable of ``(src, dst, raw_edge_label)``. Passing the
    same dictionaries for every graph of a corpus makes label ids global.
    """
    node_label_dict = LabelDict() if node_label_dict is None else node_label_dict
    edge_label_dict = LabelDict() if edge_label_dict is None else edge_label_dict
    if len(node_labels) != num_nodes:
        raise GraphError(f"expected {num_nodes} node labels, got {len(node_labels)}")
    nl = [node_label_dict.add(x) for x in node_labels]
    src, dst, el = [], [], []
    for i, (u, v, e) in enumerate(edges):
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise GraphError(
                f"edge {i} ({u}, {v}, {e!r}) has an endpoint outside [0, {num_nodes})")
        src.append(u)
        dst.append(v)
        el.append(edge_label_dict.add(e))
    return Graph(num_nodes, src, dst, el, nl, node_label_dict, edge_label_dict)


def neighborhood(g: Graph, v: int, direction: str = BOTH) -> list[int]:
    """Neighbour multiset of ``v``, one entry per incident edge endpoint."""
    if direction == IN:
        return g.src[g.in_edges(v)].tolist()
    if direction == OUT:
        return g.dst[g.out_edges(v)].tolist()
    if direction == BOTH:
        return g.src[g.in_edges(v)].tolist() + g.dst[g.out_edges(v)].tolist()
    raise ValueError(f"unknown direction {direction!r}")


def edge_histogram(g: Graph, v: int, direction: str) -> tuple[tuple[int, int], ...]:
    """Sorted ``(edge_label_id, count)`` pairs over the in- or out-edges of ``v``."""
    if direction == IN:
        idx = g.in_edges(v)
    elif direction == OUT:
        idx = g.out_edges(v)
    else:
        raise ValueError(f"direction must be 'in' or 'out', not {direction!r}")
    return tuple(sorted(Counter(g.edge_labels[idx].tolist()).items()))


def reverse_augment(g: Graph, suffix: str = "_rev") -> Graph:
    """Add a reversed copy of every edge, labelled ``<label><suffix>``.

    The edge dictionary doubles: every existing label gets a reversed twin,
    placed after all original labels, in the original order.
    """
    old = g.edge_label_dict
    new = LabelDict(old.labels)
    for label in old.labels:
        if label + suffix in old:
            raise GraphError(f"reversed label {label + suffix!r} already exists")
        new.add(label + suffix)
    new.freeze()
    offset = len(old)
    return Graph(
        g.num_nodes,
        np.concatenate([g.src, g.dst]),
        np.concatenate([g.dst, g.src]),
        np.concatenate([g.edge_labels, g.edge_labels + offset]),
        g.node_labels,
        g.node_label_dict,
        new,
    )


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel node ``v`` as ``perm[v]``; the edge order is kept."""
    perm = np.asarray(perm, dtype=np.int64)
    n = g.num_nodes
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise GraphError(f"perm is not a bijection on [0, {n})")
    labels = np.empty(n, dtype=np.int64)
    labels[perm] = g.node_labels
    return Graph(n, perm[g.src], perm[g.dst], g.edge_labels, labels,
                 g.node_label_dict, g.edge_label_dict)


def disjoint_union(graphs: Sequence[Graph]) -> tuple[Graph, np.ndarray]:
    """Union of ``graphs`` with labels merged by raw string.

    Returns the union and the graph index of every node. Dictionaries are
    rebuilt, so the inputs need not share them.
    """
    nd, ed = LabelDict(), LabelDict()
    src, dst, el, nl, owner = [], [], [], [], []
    offset = 0
    for gi, g in enumerate(graphs):
        nmap = np.array([nd.add(x) for x in g.node_label_dict.labels], dtype=np.int64)
        emap = np.array([ed.add(x) for x in g.edge_label_dict.labels], dtype=np.int64)
        src.append(g.src + offset)
        dst.append(g.dst + offset)
        el.append(emap[g.edge_labels] if g.num_edges else g.edge_labels)
        nl.append(nmap[g.node_labels] if g.num_nodes else g.node_labels)
        owner.append(np.full(g.num_nodes, gi, dtype=np.int64))
        offset += g.num_nodes
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=np.int64)
    union = Graph(offset, cat(src), cat(dst), cat(el), cat(nl), nd, ed)
    return union, cat(owner)
