"""Dataset loading, fold planning, batching and synthetic graphs.

Two on-disk formats are read:

* TU graph-classification format (``DS_A.txt``, ``DS_graph_indicator.txt``,
  ``DS_graph_labels.txt``, ``DS_node_labels.txt``, ``DS_edge_labels.txt``;
  comma separated, 1-based node ids).
* Node classification as tab-separated triples ``subject relation object``
  plus ``node class`` split files. Any of the files may be gzipped.
"""
from __future__ import annotations

import gzip
import json
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .graph import Graph, GraphError, LabelDict, build_graph, reverse_augment, IN, OUT
from .model import Batch, DegreeDict, init_node_features, ONE_HOT_IN_DEGREE, ONE_HOT_LABEL


class DataError(ValueError):
    pass


DEFAULT_DATA_DIR = Path(__file__).resolve().parents[2] / "data"

# name -> (task, directory under the data root)
KNOWN_DATASETS = {
    ("graph", "mutag"): "MUTAG",
    ("graph", "ptc_fm"): "PTC_FM",
    ("graph", "ptc_fr"): "PTC_FR",
    ("graph", "ptc_mm"): "PTC_MM",
    ("graph", "ptc_mr"): "PTC_MR",
    ("node", "aifb"): "aifb",
    ("node", "mutag"): "mutag_node",
}


def data_root() -> Path:
    return Path(os.environ.get("EDGNN_DATA_DIR", DEFAULT_DATA_DIR))


def resolve_dataset(name: str, task: str) -> Path:
    """Map a short dataset name (or an explicit path) to a directory."""
    p = Path(name)
    if p.exists():
        return p
    sub = KNOWN_DATASETS.get((task, name.lower()))
    if sub is None:
        raise DataError(f"unknown {task} dataset {name!r}")
    path = data_root() / sub
    if not path.exists():
        raise DataError(f"{task} dataset {name!r} not found at {path}")
    return path


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def _find(directory: Path, stem: str) -> Path | None:
    for candidate in (directory / stem, directory / (stem + ".gz")):
        if candidate.exists():
            return candidate
    return None


def _read_lines(path: Path) -> list[tuple[int, str]]:
    with _open_text(path) as f:
        return [(i, line.strip()) for i, line in enumerate(f, 1) if line.strip()]


@dataclass
class GraphDataset:
    name: str
    graphs: list[Graph]
    graph_labels: np.ndarray
    class_dict: LabelDict
    node_label_dict: LabelDict
    edge_label_dict: LabelDict

    def __post_init__(self):
        if len(self.graphs) != len(self.graph_labels):
            raise DataError(f"{len(self.graphs)} graphs but {len(self.graph_labels)} labels")

    def __len__(self):
        return len(self.graphs)

    @property
    def num_classes(self) -> int:
        return len(self.class_dict)

    def statistics(self) -> dict:
        nodes = np.array([g.num_nodes for g in self.graphs])
        edges = np.array([g.num_edges for g in self.graphs])
        bonds = np.array([_undirected_count(g) for g in self.graphs])
        return {
            "graphs": len(self.graphs),
            "classes": self.num_classes,
            "avg_nodes": float(nodes.mean()) if len(nodes) else 0.0,
            "avg_directed_edges": float(edges.mean()) if len(edges) else 0.0,
            "avg_undirected_edges": float(bonds.mean()) if len(bonds) else 0.0,
            "node_labels": len(self.node_label_dict),
            "edge_labels": len(self.edge_label_dict),
        }


def _undirected_count(g: Graph) -> int:
    # bonds of a symmetric graph: one orientation per pair, self-loops once
    return int(np.count_nonzero(g.src <= g.dst))


def load_tu_dataset(directory, name: str | None = None) -> GraphDataset:
    """Load a TU-format directory.

    Bonds are undirected: every ``u, v`` line yields a directed edge, and a
    line whose reverse is missing from the file gets its reverse added with
    the same label. Files that already list both orientations load as-is.
    """
    directory = Path(directory)
    if name is None:
        hits = sorted(directory.glob("*_A.txt")) + sorted(directory.glob("*_A.txt.gz"))
        if not hits:
            raise DataError(f"{directory}: no *_A.txt file")
        name = hits[0].name.split("_A.txt")[0]

    def need(suffix):
        p = _find(directory, f"{name}_{suffix}.txt")
        if p is None:
            raise DataError(f"{directory}: missing {name}_{suffix}.txt")
        return p

    a_path = need("A")
    ind_path, gl_path, nl_path = need("graph_indicator"), need("graph_labels"), need("node_labels")
    el_path = _find(directory, f"{name}_edge_labels.txt")

    def ints(path, width=None):
        out = []
        for lineno, line in _read_lines(path):
            parts = [x.strip() for x in line.split(",")]
            if width is not None and len(parts) != width:
                raise DataError(f"{path.name}:{lineno}: expected {width} fields, got {len(parts)}")
            out.append((lineno, parts))
        return out

    indicator = []
    for lineno, parts in ints(ind_path, 1):
        try:
            indicator.append(int(parts[0]))
        except ValueError:
            raise DataError(f"{ind_path.name}:{lineno}: not an integer: {parts[0]!r}") from None
    node_raw = [parts[0] for _, parts in ints(nl_path)]
    if len(node_raw) != len(indicator):
        raise DataError(f"{nl_path.name}: {len(node_raw)} labels for {len(indicator)} nodes")
    graph_raw = [parts[0] for _, parts in ints(gl_path, 1)]
    a_rows = ints(a_path, 2)
    edge_raw = [parts[0] for _, parts in ints(el_path)] if el_path else ["0"] * len(a_rows)
    if len(edge_raw) != len(a_rows):
        raise DataError(f"{el_path.name}: {len(edge_raw)} labels for {len(a_rows)} edges")

    num_graphs = len(graph_raw)
    indicator = np.asarray(indicator, dtype=np.int64)
    if len(indicator) and (indicator.min() < 1 or indicator.max() > num_graphs):
        raise DataError(f"{ind_path.name}: graph id outside 1..{num_graphs}")
    # nodes are grouped by graph in TU files; position of a node within its graph
    local = np.empty(len(indicator), dtype=np.int64)
    counts = np.zeros(num_graphs + 1, dtype=np.int64)
    for i, gid in enumerate(indicator.tolist()):
        local[i] = counts[gid]
        counts[gid] += 1

    per_graph_edges: list[list[tuple[int, int, str]]] = [[] for _ in range(num_graphs)]
    for (lineno, (su, sv)), lab in zip(a_rows, edge_raw):
        try:
            u, v = int(su) - 1, int(sv) - 1
        except ValueError:
            raise DataError(f"{a_path.name}:{lineno}: bad node id") from None
        if not (0 <= u < len(indicator) and 0 <= v < len(indicator)):
            raise DataError(f"{a_path.name}:{lineno}: node id outside 1..{len(indicator)}")
        gu, gv = indicator[u], indicator[v]
        if gu != gv:
            raise DataError(f"{a_path.name}:{lineno}: edge ({u + 1}, {v + 1}) joins graphs {gu} and {gv}")
        per_graph_edges[gu - 1].append((int(local[u]), int(local[v]), lab))

    node_dict, edge_dict, class_dict = LabelDict(), LabelDict(), LabelDict()
    node_by_graph: list[list[str]] = [[] for _ in range(num_graphs)]
    for i, gid in enumerate(indicator.tolist()):
        node_by_graph[gid - 1].append(node_raw[i])
    graphs = []
    for gi in range(num_graphs):
        edges = per_graph_edges[gi]
        present = Counter((u, v, e) for u, v, e in edges)
        missing = []
        for u, v, e in edges:
            if present[(v, u, e)] == 0:
                missing.append((v, u, e))
        graphs.append(build_graph(len(node_by_graph[gi]), node_by_graph[gi], edges + missing,
                                  node_dict, edge_dict))
    labels = np.array([class_dict.add(x) for x in graph_raw], dtype=np.int64)
    for d in (node_dict, edge_dict, class_dict):
        d.freeze()
    return GraphDataset(name, graphs, labels, class_dict, node_dict, edge_dict)


def save_tu_dataset(ds: GraphDataset, directory, name: str | None = None):
    """Write ``ds`` in TU format; every stored directed edge becomes one line."""
    name = name or ds.name
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    a, el, ind, nl = [], [], [], []
    offset = 0
    for gi, g in enumerate(ds.graphs, 1):
        for u, v, e in g.raw_edges():
            a.append(f"{u + offset + 1}, {v + offset + 1}")
            el.append(e)
        ind += [str(gi)] * g.num_nodes
        nl += g.raw_node_labels()
        offset += g.num_nodes
    gl = [ds.class_dict.label(i) for i in ds.graph_labels.tolist()]
    for suffix, rows in (("A", a), ("edge_labels", el), ("graph_indicator", ind),
                         ("node_labels", nl), ("graph_labels", gl)):
        (directory / f"{name}_{suffix}.txt").write_text("".join(r + "\n" for r in rows))


@dataclass
class NodeTask:
    name: str
    graph: Graph
    train_nodes: np.ndarray
    train_labels: np.ndarray
    test_nodes: np.ndarray
    test_labels: np.ndarray
    class_dict: LabelDict
    entity_dict: LabelDict
    reversed: bool

    def __post_init__(self):
        overlap = set(self.train_nodes.tolist()) & set(self.test_nodes.tolist())
        if overlap:
            raise DataError(f"{len(overlap)} nodes are in both the train and test split")

    @property
    def num_classes(self) -> int:
        return len(self.class_dict)

    def statistics(self) -> dict:
        return {
            "nodes": self.graph.num_nodes,
            "edges": self.graph.num_edges,
            "edge_labels": len(self.graph.edge_label_dict),
            "classes": self.num_classes,
            "train": len(self.train_nodes),
            "test": len(self.test_nodes),
        }


def load_triples_task(triples, train, test, reverse: bool = True, name: str = "") -> NodeTask:
    """Load a node-classification task from TSV triples and split files.

    Entities become nodes in first-seen order (subject before object),
    relations become edge labels. With ``reverse`` every edge gets a reversed
    twin under a fresh relation label.
    """
    triples, train, test = Path(triples), Path(train), Path(test)
    entities, relations = LabelDict(), LabelDict()
    src, dst, rel = [], [], []
    with _open_text(triples) as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{triples.name}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            s, r, o = parts
            src.append(entities.add(s))
            rel.append(relations.add(r))
            dst.append(entities.add(o))
    entities.freeze()
    relations.freeze()
    n = len(entities)
    node_dict = LabelDict([""]).freeze()
    g = Graph(n, src, dst, rel, np.zeros(n, dtype=np.int64), node_dict, relations)
    if reverse:
        g = reverse_augment(g)

    classes = LabelDict()

    def split(path):
        nodes, labels = [], []
        with _open_text(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise DataError(f"{path.name}:{lineno}: expected 2 tab-separated fields")
                if parts[0] not in entities:
                    raise DataError(f"{path.name}:{lineno}: node {parts[0]!r} does not occur in the triples")
                nodes.append(entities.id(parts[0]))
                labels.append(classes.add(parts[1]))
        return np.array(nodes, dtype=np.int64), np.array(labels, dtype=np.int64)

    tr_nodes, tr_labels = split(train)
    te_nodes, te_labels = split(test)
    classes.freeze()
    return NodeTask(name or triples.parent.name, g, tr_nodes, tr_labels, te_nodes, te_labels,
                    classes, entities, reverse)


def load_node_dataset(directory, reverse: bool = True) -> NodeTask:
    directory = Path(directory)
    paths = [_find(directory, f) for f in ("triples.tsv", "train.tsv", "test.tsv")]
    missing = [f for f, p in zip(("triples.tsv", "train.tsv", "test.tsv"), paths) if p is None]
    if missing:
        raise DataError(f"{directory}: missing {', '.join(missing)}")
    return load_triples_task(*paths, reverse=reverse, name=directory.name)


@dataclass
class Fold:
    train: list[int]
    validation: list[int]
    test: list[int]


@dataclass
class FoldPlan:
    k: int
    seed: int
    folds: list[Fold]

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "seed": self.seed,
                           "folds": [f.__dict__ for f in self.folds]}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FoldPlan":
        d = json.loads(text)
        return cls(d["k"], d["seed"], [Fold(**f) for f in d["folds"]])


def _deal(indices: np.ndarray, labels: np.ndarray, k: int, rng: np.random.Generator) -> list[list[int]]:
    """Stratified round-robin: shuffle each class, deal members onto ``k``
    buckets, continuing where the previous class stopped."""
    buckets: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for c in np.unique(labels[indices]):
        members = indices[labels[indices] == c]
        members = members[rng.permutation(len(members))]
        for i in members.tolist():
            buckets[pos % k].append(i)
            pos += 1
    return [sorted(b) for b in buckets]


def stratified_holdout(indices, labels, fraction: float, rng: np.random.Generator):
    """Split ``indices`` into (kept, held_out) with about ``fraction`` held out
    per class. Returns an empty held-out set for tiny inputs."""
    indices = np.asarray(indices, dtype=np.int64)
    k = max(1, int(round(1.0 / fraction))) if fraction > 0 else 0
    if k < 2 or len(indices) < k:
        return sorted(indices.tolist()), []
    buckets = _deal(indices, np.asarray(labels), k, rng)
    held = buckets[0]
    kept = sorted(set(indices.tolist()) - set(held))
    return kept, held


def kfold_split(labels, k: int, seed: int, val_fraction: float = 0.1) -> FoldPlan:
    """Stratified ``k``-fold plan with a stratified validation carve-out from
    every training portion."""
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if k < 2 and n > 1:
        raise DataError("k must be at least 2")
    smallest = min(Counter(labels.tolist()).values()) if n else 0
    if k > smallest:
        raise DataError(f"k={k} exceeds the smallest class size {smallest}")
    rng = np.random.default_rng(seed)
    tests = _deal(np.arange(n), labels, k, rng)
    folds = []
    for test in tests:
        rest = np.setdiff1d(np.arange(n), test)
        train, val = stratified_holdout(rest, labels, val_fraction, rng)
        folds.append(Fold(train, val, test))
    return FoldPlan(k, seed, folds)


def graph_features(ds: GraphDataset) -> list[np.ndarray]:
    return [init_node_features(g, ONE_HOT_LABEL) for g in ds.graphs]


def batch_graphs(graphs: Sequence[Graph], features: Sequence[np.ndarray],
                 targets=None) -> Batch:
    """Disjoint union of ``graphs`` as one block-diagonal batch."""
    seg = np.concatenate([np.full(g.num_nodes, i, dtype=np.int64) for i, g in enumerate(graphs)]) \
        if graphs else np.zeros(0, dtype=np.int64)
    A = sp.block_diag([g.neighbor_matrix() for g in graphs], format="csr") if graphs else sp.csr_matrix((0, 0))
    A.sort_indices()
    return Batch(
        features=np.vstack(features),
        adjacency=A,
        in_counts=np.vstack([g.label_counts(IN) for g in graphs]),
        out_counts=np.vstack([g.label_counts(OUT) for g in graphs]),
        segments=seg,
        num_graphs=len(graphs),
        targets=None if targets is None else np.asarray(targets, dtype=np.int64),
    )


def node_task_batch(task: NodeTask, nodes, labels, degree_dict: DegreeDict | None = None) -> Batch:
    g = task.graph
    X = init_node_features(g, ONE_HOT_IN_DEGREE, degree_dict)
    return Batch(
        features=X,
        adjacency=g.neighbor_matrix(),
        in_counts=g.label_counts(IN),
        out_counts=g.label_counts(OUT),
        segments=np.zeros(g.num_nodes, dtype=np.int64),
        num_graphs=1,
        targets=np.asarray(labels, dtype=np.int64),
        target_nodes=np.asarray(nodes, dtype=np.int64),
    )


def gen_random_graph(n: int, p: float, labels: Sequence[str] = ("a", "b"),
                     edge_labels: Sequence[str] = ("x", "y"), seed: int = 0,
                     node_label_dict: LabelDict | None = None,
                     edge_label_dict: LabelDict | None = None) -> Graph:
    """Directed G(n, p) without self-loops, labels drawn uniformly."""
    if n < 0 or not 0.0 <= p <= 1.0:
        raise DataError(f"invalid G(n, p) parameters n={n}, p={p}")
    rng = np.random.default_rng(seed)
    node_raw = [labels[i] for i in rng.integers(0, len(labels), size=n)]
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    us, vs = np.nonzero(mask)
    el = rng.integers(0, len(edge_labels), size=len(us))
    edges = [(int(u), int(v), edge_labels[e]) for u, v, e in zip(us, vs, el)]
    return build_graph(n, node_raw, edges, node_label_dict, edge_label_dict)


def _undirected(n: int, pairs, label="-", edge_label="-") -> Graph:
    edges = []
    for u, v in pairs:
        edges += [(u, v, edge_label), (v, u, edge_label)]
    return build_graph(n, [label] * n, edges)


def cycle_graph(n: int) -> Graph:
    return _undirected(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    return _undirected(n, [(i, i + 1) for i in range(n - 1)])


def gen_wl_hard_pair(n: int) -> tuple[Graph, Graph]:
    """``C_n`` against two disjoint copies of ``C_{n/2}``, uniform labels.

    Both are 2-regular, so 1-WL cannot tell them apart.
    """
    if n < 6 or n % 2:
        raise DataError(f"n must be even and at least 6, got {n}")
    h = n // 2
    pairs = [(i, (i + 1) % h) for i in range(h)] + [(h + i, h + (i + 1) % h) for i in range(h)]
    return cycle_graph(n), _undirected(n, pairs)


def graph_to_json(g: Graph) -> dict:
    return {"num_nodes": g.num_nodes, "node_labels": g.raw_node_labels(),
            "edges": [list(e) for e in g.raw_edges()]}


def save_graph_json(g: Graph, path):
    Path(path).write_text(json.dumps(graph_to_json(g)) + "\n")


def load_graph_json(path) -> Graph:
    """Single graph as ``{"num_nodes": n, "node_labels": [...], "edges": [[u, v, label], ...]}``."""
    try:
        d = json.loads(Path(path).read_text())
        return build_graph(int(d["num_nodes"]), [str(x) for x in d["node_labels"]],
                           [(int(u), int(v), str(e)) for u, v, e in d["edges"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed graph file ({exc})") from None
