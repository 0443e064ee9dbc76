"""Summary tables over one or more metrics files."""
from __future__ import annotations

import json
from pathlib import Path

from .train import aggregate

HEADER = ("accuracy in %; avg over runs +- sample std (n-1) of run means; "
          "max(run) = best run mean, max(fold) = best single fold")


class ReportError(ValueError):
    pass


def _load(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"{path}: cannot read metrics ({exc})") from None
    for key in ("config", "per_fold"):
        if key not in data:
            raise ReportError(f"{path}: missing '{key}'")
    for i, rec in enumerate(data["per_fold"]):
        for key in ("run", "seed", "status", "test_accuracy"):
            if key not in rec:
                raise ReportError(f"{path}: per_fold[{i}] lacks '{key}'")
    return data


def _pct(x):
    return "   -  " if x is None else f"{100 * x:5.1f}"


def run_report(paths) -> tuple[str, dict]:
    """Recompute aggregates from per-fold records; return (text table, JSON dict)."""
    paths = list(paths)
    if not paths:
        raise ReportError("need at least one metrics file")
    rows = []
    for p in paths:
        data = _load(p)
        per_run, summary = aggregate(data["per_fold"])
        cfg = data["config"]
        variant = "+".join(v for v in ("emb", "reg") if cfg.get(v)) or "default"
        rows.append({"file": str(p), "task": cfg.get("task"), "dataset": cfg.get("dataset"),
                     "variant": variant, "per_run": per_run, **summary})
    lines = [HEADER, f"{'task':6} {'dataset':10} {'variant':8} {'avg':>6} {'std':>5} "
                     f"{'max(run)':>8} {'max(fold)':>9} {'runs':>4} {'failed':>6}"]
    for r in rows:
        lines.append(f"{r['task']:6} {r['dataset']:10} {r['variant']:8} {_pct(r['mean']):>6} "
                     f"{_pct(r['std']):>5} {_pct(r['max_of_means']):>8} {_pct(r['max_of_folds']):>9} "
                     f"{r['runs']:>4} {r['failed_runs']:>6}")
    return "\n".join(lines), {"note": HEADER, "rows": rows}
