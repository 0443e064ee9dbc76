"""One-dimensional Weisfeiler-Lehman colour refinement.

Two variants share one code path:

``undirected``
    new colour from (own colour, multiset of neighbour colours), neighbours
    taken over both edge directions, edge labels ignored.
``directed_labeled``
    additionally the per-label in- and out-edge counts of the vertex.

The injective relabelling is an exact dictionary over signature tuples, and
new ids follow the sorted order of the signatures. Colour ids are therefore
canonical: isomorphic inputs get identical ids, not merely equal histograms.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import Graph, disjoint_union, edge_histogram, IN, OUT

UNDIRECTED = "undirected"
DIRECTED_LABELED = "directed_labeled"
VARIANTS = (UNDIRECTED, DIRECTED_LABELED)


@dataclass(frozen=True)
class Coloring:
    colors: tuple[int, ...]
    num_colors: int
    step: int = 0

    def __len__(self):
        return len(self.colors)

    def classes(self) -> list[list[int]]:
        out = [[] for _ in range(self.num_colors)]
        for v, c in enumerate(self.colors):
            out[c].append(v)
        return out


@dataclass
class RefinementResult:
    history: list[Coloring]
    stable_at: int

    @property
    def final(self) -> Coloring:
        return self.history[-1]


class Verdict(enum.Enum):
    NON_ISOMORPHIC = "NonIsomorphic"
    POSSIBLY_ISOMORPHIC = "PossiblyIsomorphic"

    def __str__(self):
        return self.value


@dataclass
class IsomorphismTestResult:
    verdict: Verdict
    step: int
    # per step: (histogram of g, histogram of h), colour ids shared between them
    histograms: list[tuple[dict, dict]] = field(default_factory=list)
    reason: str = ""


def _compact(keys: Sequence, step: int) -> Coloring:
    # sorted distinct keys -> 0..k-1; sorting makes the ids canonical
    table = {k: i for i, k in enumerate(sorted(set(keys)))}
    return Coloring(tuple(table[k] for k in keys), len(table), step)


def initial_coloring(g: Graph) -> Coloring:
    """Colour every vertex by its node label, ranked by raw label string."""
    raw = g.node_label_dict.labels
    return _compact([raw[i] for i in g.node_labels.tolist()], 0)


def signatures(g: Graph, c: Coloring, variant: str = DIRECTED_LABELED) -> list[tuple]:
    if variant not in VARIANTS:
        raise ValueError(f"unknown WL variant {variant!r}")
    if len(c) != g.num_nodes:
        raise ValueError(f"coloring covers {len(c)} nodes, graph has {g.num_nodes}")
    col = np.asarray(c.colors, dtype=np.int64)
    src_c, dst_c = col[g.src], col[g.dst]
    sigs = []
    for v in range(g.num_nodes):
        ie, oe = g.in_edges(v), g.out_edges(v)
        nbrs = tuple(sorted(src_c[ie].tolist() + dst_c[oe].tolist()))
        if variant == DIRECTED_LABELED:
            sigs.append((c.colors[v], nbrs, edge_histogram(g, v, IN), edge_histogram(g, v, OUT)))
        else:
            sigs.append((c.colors[v], nbrs))
    return sigs


def wl_step(g: Graph, c: Coloring, variant: str = DIRECTED_LABELED) -> Coloring:
    """One refinement round."""
    return _compact(signatures(g, c, variant), c.step + 1)


def same_partition(a: Coloring, b: Coloring) -> bool:
    if len(a) != len(b):
        return False
    return a.num_colors == b.num_colors and partition_refines(a, b)


def partition_refines(a: Coloring, b: Coloring) -> bool:
    """True iff every colour class of ``a`` lies inside one class of ``b``."""
    if len(a) != len(b):
        raise ValueError(f"colorings differ in size: {len(a)} vs {len(b)}")
    seen: dict[int, int] = {}
    for x, y in zip(a.colors, b.colors):
        if seen.setdefault(x, y) != y:
            return False
    return True


def refine_to_stable(g: Graph, variant: str = DIRECTED_LABELED) -> RefinementResult:
    """Refine until the partition stops changing.

    ``history[t]`` is the colouring after ``t`` rounds; the last entry is the
    first round whose partition repeats the previous one, at ``stable_at``.
    """
    history = [initial_coloring(g)]
    while True:
        nxt = wl_step(g, history[-1], variant)
        history.append(nxt)
        if same_partition(nxt, history[-2]):
            return RefinementResult(history, nxt.step)


def color_histogram(c: Coloring, nodes: Sequence[int] | None = None) -> dict[int, int]:
    cols = c.colors if nodes is None else [c.colors[v] for v in nodes]
    return dict(sorted(Counter(cols).items()))


def wl_isomorphism_test(g: Graph, h: Graph, variant: str = DIRECTED_LABELED) -> IsomorphismTestResult:
    """Pairwise 1-WL test, refining the disjoint union so colour ids are shared."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown WL variant {variant!r}")
    union, owner = disjoint_union([g, h])
    g_nodes = np.flatnonzero(owner == 0).tolist()
    h_nodes = np.flatnonzero(owner == 1).tolist()

    c = initial_coloring(union)
    hists = [(color_histogram(c, g_nodes), color_histogram(c, h_nodes))]
    if g.num_nodes != h.num_nodes:
        return IsomorphismTestResult(Verdict.NON_ISOMORPHIC, 0, hists,
                                     f"vertex counts differ ({g.num_nodes} vs {h.num_nodes})")
    if hists[0][0] != hists[0][1]:
        return IsomorphismTestResult(Verdict.NON_ISOMORPHIC, 0, hists, "node label multisets differ")
    while True:
        nxt = wl_step(union, c, variant)
        hists.append((color_histogram(nxt, g_nodes), color_histogram(nxt, h_nodes)))
        if hists[-1][0] != hists[-1][1]:
            return IsomorphismTestResult(Verdict.NON_ISOMORPHIC, nxt.step, hists,
                                         f"color histograms differ at step {nxt.step}")
        if same_partition(nxt, c):
            return IsomorphismTestResult(Verdict.POSSIBLY_ISOMORPHIC, nxt.step, hists,
                                         f"joint coloring stable at step {nxt.step}")
        c = nxt


def histogram_diff(a: dict, b: dict) -> dict[int, tuple[int, int]]:
    """Colours whose counts differ, mapped to ``(count in a, count in b)``."""
    return {k: (a.get(k, 0), b.get(k, 0)) for k in sorted(set(a) | set(b))
            if a.get(k, 0) != b.get(k, 0)}
