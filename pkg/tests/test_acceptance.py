"""Acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line straight to the terminal and
then asserts. The training criteria run the full default recipes and take
several minutes on one core.
"""
import time

import numpy as np
import pytest

from edgnn.cli import main
from edgnn.data import (DataError, cycle_graph, gen_wl_hard_pair, load_node_dataset,
                        load_tu_dataset, path_graph, resolve_dataset, save_graph_json)
from edgnn.gradcheck import TOLERANCE, run_suite
from edgnn.graph import disjoint_union, permute
from edgnn.properties import (concat_form_check, partition_match_check, random_labeled_graph,
                              wl_equal_rows_check)
from edgnn.train import TrainConfig, train_graph_classifier, train_node_classifier
from edgnn.wl import VARIANTS, Verdict, initial_coloring, same_partition, wl_isomorphism_test, wl_step


@pytest.fixture
def verdict(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        assert ok, f"{criterion}: {detail}"
    return emit


def load_or_none(name, task, **kw):
    try:
        path = resolve_dataset(name, task)
    except DataError as exc:
        return None, str(exc)
    if task == "graph":
        return load_tu_dataset(path), ""
    return load_node_dataset(path, **kw), ""


def test_c1_wl_corner_cases(tmp_path, verdict, capsys):
    c6, c3c3 = gen_wl_hard_pair(6)
    files = {}
    for name, g in (("c6", c6), ("c3c3", c3c3), ("p3", path_graph(3)), ("c3", cycle_graph(3))):
        files[name] = str(tmp_path / f"{name}.json")
        save_graph_json(g, files[name])
    t0 = time.perf_counter()
    hard = main(["wl-test", "--a", files["c6"], "--b", files["c3c3"]])
    res = wl_isomorphism_test(path_graph(3), cycle_graph(3))
    easy = main(["wl-test", "--a", files["p3"], "--b", files["c3"]])
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    ok = (hard == 0 and easy == 1 and res.verdict is Verdict.NON_ISOMORPHIC and res.step == 1
          and "NonIsomorphic (step 1)" in out and elapsed < 1.0)
    verdict("C1 WL corner cases", ok,
            f"C6 vs C3+C3 exit {hard}, P3 vs C3 exit {easy} at step {res.step}, {elapsed:.3f} s")


def joint_ids_match(g, h, perm, variant):
    u, _ = disjoint_union([g, h])
    n = g.num_nodes
    c = initial_coloring(u)
    while True:
        if any(c.colors[v] != c.colors[n + perm[v]] for v in range(n)):
            return False
        nxt = wl_step(u, c, variant)
        if same_partition(nxt, c):
            return all(nxt.colors[v] == nxt.colors[n + perm[v]] for v in range(n))
        c = nxt


def test_c2_permutation_invariance(verdict):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    pairs = possibly = ids_equal = 0
    for _ in range(500):
        g = random_labeled_graph(rng, 30)
        perm = rng.permutation(g.num_nodes)
        h = permute(g, perm)
        for variant in VARIANTS:
            pairs += 1
            possibly += wl_isomorphism_test(g, h, variant).verdict is Verdict.POSSIBLY_ISOMORPHIC
            ids_equal += joint_ids_match(g, h, perm, variant)
    elapsed = time.perf_counter() - t0
    ok = possibly == pairs and ids_equal == pairs and elapsed < 30
    verdict("C2 permutation invariance", ok,
            f"{possibly}/{pairs} PossiblyIsomorphic, {ids_equal}/{pairs} identical ids, {elapsed:.1f} s")


def test_c3_wl_equal_vertices_embed_equal(verdict):
    t0 = time.perf_counter()
    results = [wl_equal_rows_check(seed, max_nodes=15, steps=3) for seed in range(200)]
    elapsed = time.perf_counter() - t0
    violations = sum(len(r.violations) for r in results)
    gap = max(r.max_gap for r in results)
    pairs = sum(r.pairs_checked for r in results)
    ok = violations == 0 and gap < 1e-8 and elapsed < 60
    verdict("C3 WL-equal vertices get equal embeddings", ok,
            f"200 graphs, {pairs} same-colour pairs, {violations} violations, "
            f"max gap {gap:.1e}, {elapsed:.1f} s")


def test_c4_embedding_partition_matches_wl(verdict, capsys):
    results = [partition_match_check(seed, max_nodes=12, steps=3, width=64) for seed in range(200)]
    failures = [r for r in results if not r.matched]
    rate = 1 - len(failures) / len(results)
    with capsys.disabled():
        for r in failures:
            print(f"  mismatch seed {r.seed}: n={r.num_nodes} step {r.first_mismatch} "
                  f"WL classes {r.wl_classes} vs embedding classes {r.embedding_classes}")
    verdict("C4 embedding partition equals WL partition", rate >= 0.95,
            f"{len(results) - len(failures)}/{len(results)} graphs ({100 * rate:.1f}%), "
            f"{len(failures)} failures listed above")


def test_c5_concat_form_equivalence(verdict):
    t0 = time.perf_counter()
    worst = max(concat_form_check(seed) for seed in range(100))
    elapsed = time.perf_counter() - t0
    verdict("C5 stacked-weight layer equals four-term layer", worst < 1e-9 and elapsed < 10,
            f"100 configurations, max |diff| {worst:.1e}, {elapsed:.2f} s")


def test_c6_gradient_check(verdict):
    t0 = time.perf_counter()
    results = run_suite(range(20))
    elapsed = time.perf_counter() - t0
    worst = max(r.max_rel_error for r in results)
    ok = all(r.ok for r in results) and elapsed < 60
    verdict("C6 gradient check", ok,
            f"20 seeds x graph/node heads, max relative error {worst:.1e} (< {TOLERANCE:g}), "
            f"{elapsed:.1f} s")


def test_c7_mutag_statistics(verdict):
    ds, err = load_or_none("mutag", "graph")
    if ds is None:
        verdict("C7 MUTAG statistics", False, err)
    s = ds.statistics()
    ok = s["graphs"] == 188 and s["node_labels"] == 6 and s["edge_labels"] == 3
    verdict("C7 MUTAG statistics", ok,
            f"{s['graphs']} graphs (want 188), {s['node_labels']} node labels (want 6), "
            f"{s['edge_labels']} edge labels (want 3); avg nodes {s['avg_nodes']:.2f}, "
            f"avg bonds {s['avg_undirected_edges']:.2f}")


PTC_EXPECTED = {"ptc_fm": (349, 18, 4), "ptc_fr": (351, 19, 4),
                "ptc_mm": (336, 20, 4), "ptc_mr": (344, 18, 4)}


def test_c7_ptc_statistics(verdict):
    found, problems = [], []
    for name, (graphs, nl, el) in PTC_EXPECTED.items():
        ds, err = load_or_none(name, "graph")
        if ds is None:
            problems.append(err)
            continue
        s = ds.statistics()
        got = (s["graphs"], s["node_labels"], s["edge_labels"])
        found.append(f"{name} {got}")
        if got != (graphs, nl, el):
            problems.append(f"{name}: got {got}, want {(graphs, nl, el)}")
    verdict("C7 PTC statistics", not problems, "; ".join(found + problems))


def test_c7_aifb_statistics(verdict):
    task, err = load_or_none("aifb", "node", reverse=False)
    if task is None:
        verdict("C7 AIFB statistics", False, err)
    s = task.statistics()
    ok = (s["nodes"], s["edges"], s["edge_labels"]) == (8285, 29043, 45)
    verdict("C7 AIFB statistics", ok,
            f"{s['nodes']} nodes, {s['edges']} edges, {s['edge_labels']} relations "
            f"(want 8285 / 29043 / 45)")


def test_c7_node_mutag_statistics(verdict):
    task, err = load_or_none("mutag", "node", reverse=False)
    if task is None:
        verdict("C7 node-MUTAG statistics", False, err)
    s = task.statistics()
    ok = (s["nodes"], s["edges"], s["edge_labels"], s["classes"]) == (23644, 74227, 23, 2)
    verdict("C7 node-MUTAG statistics", ok,
            f"{s['nodes']} nodes, {s['edges']} edges, {s['edge_labels']} relations, "
            f"{s['classes']} classes (want 23644 / 74227 / 23 / 2)")


def run_training(fn, config, data):
    t0 = time.perf_counter()
    metrics = fn(config, data)
    return metrics["aggregate"], time.perf_counter() - t0


def describe(agg, elapsed):
    mean = "n/a" if agg["mean"] is None else f"{100 * agg['mean']:.1f}"
    std = "n/a" if agg["std"] is None else f"{100 * agg['std']:.1f}"
    return (f"mean {mean} +- {std} over {agg['runs']} runs ({agg['failed_runs']} failed), "
            f"{elapsed / 60:.1f} min")


def test_c8_mutag_graph_classification(verdict):
    ds, err = load_or_none("mutag", "graph")
    if ds is None:
        verdict("C8 MUTAG graph classification", False, err)
    agg, elapsed = run_training(train_graph_classifier, TrainConfig.for_task("graph"), ds)
    ok = agg["mean"] is not None and agg["mean"] >= 0.80 and elapsed <= 15 * 60
    verdict("C8 MUTAG graph classification", ok, "10 seeds x 10 folds, " + describe(agg, elapsed)
            + " (need >= 80.0, <= 15 min)")


def test_c9_ptc_fr_graph_classification(verdict):
    ds, err = load_or_none("ptc_fr", "graph")
    if ds is None:
        verdict("C9 PTC FR graph classification", False, err)
    cfg = TrainConfig.for_task("graph", dataset="ptc_fr")
    agg, elapsed = run_training(train_graph_classifier, cfg, ds)
    ok = agg["mean"] is not None and agg["mean"] >= 0.60 and elapsed <= 20 * 60
    verdict("C9 PTC FR graph classification", ok, describe(agg, elapsed) + " (need >= 60.0, <= 20 min)")


def test_c10_aifb_node_classification(verdict):
    task, err = load_or_none("aifb", "node")
    if task is None:
        verdict("C10 AIFB node classification", False, err)
    cfg = TrainConfig.for_task("node", dataset="aifb")
    agg, elapsed = run_training(train_node_classifier, cfg, task)
    ok = agg["mean"] is not None and agg["mean"] >= 0.85 and elapsed <= 30 * 60
    verdict("C10 AIFB node classification", ok, describe(agg, elapsed) + " (need >= 85.0, <= 30 min)")


def test_c10_node_mutag_classification(verdict):
    task, err = load_or_none("mutag", "node")
    if task is None:
        verdict("C10 node-MUTAG classification", False, err)
    cfg = TrainConfig.for_task("node", dataset="mutag")
    agg, elapsed = run_training(train_node_classifier, cfg, task)
    ok = agg["mean"] is not None and agg["mean"] >= 0.72 and elapsed <= 30 * 60
    verdict("C10 node-MUTAG classification", ok, describe(agg, elapsed) + " (need >= 72.0, <= 30 min)")
