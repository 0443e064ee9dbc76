"""
Where colour refinement succeeds and where it cannot
=====================================================

1-WL refinement separates most non-isomorphic graphs quickly, but it is
blind to regular graphs of equal degree. Edge directions and edge labels
give the directed variant extra information.
"""
import numpy as np

from edgnn import build_graph, permute
from edgnn.data import cycle_graph, gen_wl_hard_pair, path_graph
from edgnn.wl import refine_to_stable, wl_isomorphism_test

# A path on three vertices against a triangle: the degree histograms differ
# after one round.
res = wl_isomorphism_test(path_graph(3), cycle_graph(3), "undirected")
print("P3 vs C3:", res.verdict, "at step", res.step)
for t, (a, b) in enumerate(res.histograms):
    print("  step", t, a, b)

# A 6-cycle against two triangles. Every vertex has two neighbours in both
# graphs, so no round ever splits anything.
c6, two_triangles = gen_wl_hard_pair(6)
res = wl_isomorphism_test(c6, two_triangles)
print("C6 vs C3+C3:", res.verdict, "-", res.reason)

# The path on four vertices needs one round to split ends from middles and a
# second round to confirm nothing else changes.
r = refine_to_stable(path_graph(4), "undirected")
print("P4 classes:", r.final.classes(), "stable at", r.stable_at)

# Direction matters only for the directed variant: on u -> v the two
# endpoints look the same when edges are treated as undirected.
g = build_graph(2, ["a", "a"], [(0, 1, "e")])
for variant in ("undirected", "directed_labeled"):
    print(variant, refine_to_stable(g, variant).final.colors)

# Relabelling the vertices never changes the verdict, and the joint
# refinement hands matching vertices the same colour id.
rng = np.random.default_rng(0)
g = build_graph(5, list("abaab"), [(0, 1, "x"), (1, 2, "y"), (2, 3, "x"), (3, 4, "y"), (4, 0, "x")])
h = permute(g, rng.permutation(5))
print("g vs permuted g:", wl_isomorphism_test(g, h).verdict)
