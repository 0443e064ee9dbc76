"""Command line entry point: ``edgnn <command> ...``.

Exit codes: 0 success (``wl-test``: possibly isomorphic), 1 ``wl-test``
non-isomorphic or ``gradcheck`` failure, 2 usage or data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .data import DataError, load_graph_json, load_tu_dataset
from .wl import VARIANTS, DIRECTED_LABELED, Verdict, histogram_diff, wl_isomorphism_test


def _graph_arg(path: str, index: int | None):
    p = Path(path)
    if p.is_dir():
        ds = load_tu_dataset(p)
        if index is None:
            raise DataError(f"{path} is a dataset directory; pass an index")
        return ds.graphs[index]
    if not p.exists():
        raise DataError(f"graph file {path} not found")
    return load_graph_json(p)


def _write(out, payload: dict):
    if out:
        Path(out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_wl_test(args) -> int:
    g = _graph_arg(args.a, args.a_index)
    h = _graph_arg(args.b, args.b_index)
    t0 = time.perf_counter()
    res = wl_isomorphism_test(g, h, args.variant)
    elapsed = time.perf_counter() - t0
    print(f"{res.verdict} (step {res.step}): {res.reason}")
    for t, (ha, hb) in enumerate(res.histograms):
        diff = histogram_diff(ha, hb)
        print(f"  step {t}: {len(ha)} colors" + (f", diff {diff}" if diff else ""))
    print(f"  {elapsed * 1000:.1f} ms")
    _write(args.out, {
        "verdict": str(res.verdict), "step": res.step, "reason": res.reason,
        "variant": args.variant, "seed": args.seed,
        "histograms": [[{str(k): v for k, v in a.items()}, {str(k): v for k, v in b.items()}]
                       for a, b in res.histograms],
    })
    return 0 if res.verdict is Verdict.POSSIBLY_ISOMORPHIC else 1


def _train_config(args, task):
    from .train import TrainConfig
    fields = ("dataset", "layers", "hidden", "lr", "weight_decay", "dropout", "batch_size",
              "max_epochs", "patience", "seed", "runs", "folds", "val_fraction")
    overrides = {f: getattr(args, f) for f in fields if getattr(args, f, None) is not None}
    if task == "node":
        overrides.update(emb=args.emb, reg=args.reg)
    else:
        overrides.update(emb=args.emb)
    return TrainConfig.for_task(task, **overrides)


def cmd_train(args, task) -> int:
    from .train import dump_metrics, train_graph_classifier, train_node_classifier
    config = _train_config(args, task)
    t0 = time.perf_counter()
    metrics = (train_graph_classifier if task == "graph" else train_node_classifier)(config)
    agg = metrics["aggregate"]
    mean = "n/a" if agg["mean"] is None else f"{100 * agg['mean']:.1f}"
    std = "n/a" if agg["std"] is None else f"{100 * agg['std']:.1f}"
    print(f"{task} {config.dataset}: accuracy {mean} +- {std} over {agg['runs']} runs "
          f"({agg['failed_runs']} failed) in {time.perf_counter() - t0:.0f} s")
    text = dump_metrics(metrics, args.out)
    if not args.out:
        print(text)
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import TOLERANCE, run_suite
    results = run_suite(range(args.seed, args.seed + args.seeds))
    bad = [r for r in results if not r.ok]
    for r in results:
        print(f"seed {r.seed:3d} {r.task:5}: max rel err {r.max_rel_error:.2e} "
              f"({r.num_entries} entries, worst {r.worst_param}) {'ok' if r.ok else 'FAIL'}")
    print(f"{len(results) - len(bad)}/{len(results)} checks below {TOLERANCE:g}")
    _write(args.out, {"seed": args.seed, "tolerance": TOLERANCE,
                      "results": [r.__dict__ | {"ok": r.ok} for r in results]})
    return 1 if bad else 0


def cmd_report(args) -> int:
    from .report import run_report
    text, payload = run_report(args.metrics)
    print(text)
    _write(args.out, payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edgnn", description="edGNN and directed labelled WL refinement")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write JSON results here")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("wl-test", help="pairwise 1-WL test")
    p.add_argument("--a", required=True, help="graph JSON file or TU dataset directory")
    p.add_argument("--b", required=True)
    p.add_argument("--a-index", type=int)
    p.add_argument("--b-index", type=int)
    p.add_argument("--variant", choices=VARIANTS, default=DIRECTED_LABELED)
    common(p)
    p.set_defaults(func=cmd_wl_test)

    for task in ("graph", "node"):
        p = sub.add_parser(f"train-{task}", help=f"{task} classification with the default recipe")
        p.add_argument("--dataset", required=True, help="short name (e.g. mutag) or a directory")
        for name, typ in (("layers", int), ("hidden", int), ("lr", float), ("weight-decay", float),
                          ("dropout", float), ("batch-size", int), ("max-epochs", int),
                          ("patience", int), ("runs", int), ("folds", int), ("val-fraction", float)):
            p.add_argument(f"--{name}", type=typ)
        p.add_argument("--emb", action="store_true", help="learned node/edge embeddings")
        if task == "node":
            p.add_argument("--reg", action="store_true", help="do not add reversed relations")
        common(p)
        p.set_defaults(func=lambda a, t=task: cmd_train(a, t))

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seeds", type=int, default=20)
    common(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="tabulate metrics files")
    p.add_argument("metrics", nargs="+")
    common(p)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, ValueError, FileNotFoundError) as exc:
        print(f"edgnn {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
