import json

import numpy as np
import pytest

from edgnn.cli import main
from edgnn.data import cycle_graph, path_graph, gen_random_graph, save_graph_json
from edgnn.graph import permute


@pytest.fixture
def graph_files(tmp_path):
    g = gen_random_graph(10, 0.3, seed=1)
    paths = {}
    for name, graph in (("g", g), ("pg", permute(g, np.random.default_rng(0).permutation(10))),
                        ("p3", path_graph(3)), ("c3", cycle_graph(3))):
        paths[name] = tmp_path / f"{name}.json"
        save_graph_json(graph, paths[name])
    return paths


def test_wl_test_permuted_pair(graph_files, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["wl-test", "--a", str(graph_files["g"]), "--b", str(graph_files["pg"]),
                 "--out", str(out)]) == 0
    assert "PossiblyIsomorphic" in capsys.readouterr().out
    assert json.loads(out.read_text())["verdict"] == "PossiblyIsomorphic"


def test_wl_test_p3_vs_c3(graph_files, capsys):
    code = main(["wl-test", "--a", str(graph_files["p3"]), "--b", str(graph_files["c3"]),
                 "--variant", "undirected"])
    assert code == 1
    assert "NonIsomorphic (step 1)" in capsys.readouterr().out


def test_wl_test_dataset_index(capsys):
    from edgnn.data import resolve_dataset
    d = str(resolve_dataset("mutag", "graph"))
    assert main(["wl-test", "--a", d, "--a-index", "3", "--b", d, "--b-index", "3"]) == 0
    assert main(["wl-test", "--a", d, "--a-index", "0", "--b", d, "--b-index", "1"]) == 1


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["wl-test", "--bogus"])
    assert exc.value.code == 2
    assert main(["wl-test", "--a", str(tmp_path / "none.json"), "--b", str(tmp_path / "x.json")]) == 2
    assert main(["train-graph", "--dataset", "nope"]) == 2
    assert main(["train-graph", "--dataset", "mutag", "--hidden", "0"]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_dataset_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv("EDGNN_DATA_DIR", str(tmp_path))
    assert main(["train-node", "--dataset", "aifb"]) == 2


def test_train_graph_byte_identical(tmp_path):
    args = ["train-graph", "--dataset", "mutag", "--seed", "7", "--runs", "1", "--folds", "3",
            "--max-epochs", "2", "--hidden", "8"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    m = json.loads(a.read_text())
    assert m["config"]["seed"] == 7 and m["config"]["hidden"] == 8
    assert main(["report", str(a), str(b)]) == 0


def test_train_node_flags(tmp_path, monkeypatch):
    captured = {}

    def fake(config, task=None):
        captured["config"] = config
        from edgnn.train import make_metrics
        return make_metrics(config, [{"run": 0, "fold": 0, "seed": 0, "status": "ok",
                                      "test_accuracy": 1.0}])
    monkeypatch.setattr("edgnn.train.train_node_classifier", fake)
    assert main(["train-node", "--dataset", "mutag", "--reg", "--emb", "--lr", "0.01",
                 "--out", str(tmp_path / "m.json")]) == 0
    c = captured["config"]
    assert c.reg and c.emb and c.lr == 0.01 and c.dropout == 0.5 and c.max_epochs == 400


def test_gradcheck_command(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert main(["gradcheck", "--seeds", "2", "--out", str(out)]) == 0
    assert all(r["ok"] for r in json.loads(out.read_text())["results"])
