"""Run artifacts: manifest.json, summary.csv, pool-<c>.json, selection-<c>.json,
trace-<c>-<r>.jsonl."""
from __future__ import annotations

import csv
import io
import json
import time
from pathlib import Path

from .pipeline import ExperimentResult

MANIFEST_FORMAT = "cgmi-manifest"
MANIFEST_VERSION = 1

SUMMARY_FIELDS = ["class", "mode", "loss", "selection", "acc1", "acc5", "delta_eval", "fid",
                  "attack_queries", "selection_queries", "evaluation_queries", "partial"]


def summary_rows(result: ExperimentResult) -> list[dict]:
    cfg = result.config
    rows = []
    for r in result.classes:
        m = r.metrics
        rows.append({
            "class": r.target_class, "mode": cfg.mode, "loss": cfg.loss,
            "selection": int(cfg.selection),
            "acc1": m.acc1 if m else "", "acc5": m.acc5 if m else "",
            "delta_eval": m.delta_eval if m else "", "fid": m.fid if m else "",
            "attack_queries": r.ledger.attack, "selection_queries": r.ledger.selection,
            "evaluation_queries": r.ledger.evaluation, "partial": int(r.partial),
        })
    return rows


def write_csv(path, rows, fieldnames) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    Path(path).write_text(buf.getvalue())


def build_manifest(result: ExperimentResult, scenario_path=None, oracle: dict | None = None,
                   artifacts: dict | None = None, started: float | None = None) -> dict:
    cfg = result.config
    classes = []
    for r in result.classes:
        classes.append({
            "class": r.target_class,
            "restart_seeds": [cfg.attack_config(r.target_class).restart_seed(i) for i in range(cfg.restarts)],
            "metrics": r.metrics.to_dict() if r.metrics else None,
            "ledger": r.ledger.to_dict(),
            "budget_used": r.budget_used,
            "reconciled": r.ledger.target_total == r.budget_used,
            "pool_size": len(r.pool),
            "selected": len(r.selection.indices),
            "partial": r.partial,
            "error": r.error,
            "artifacts": (artifacts or {}).get(r.target_class, {}),
        })
    return {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "config": cfg.to_dict(),
        "seeds": {"root": cfg.seed},
        "scenario": None if scenario_path is None else str(scenario_path),
        "oracle": oracle or {"kind": "local"},
        "classes": classes,
        "summary": result.summary(),
        "partial": result.partial,
        "interrupted": bool(result.extra.get("interrupted")),
        "wall_clock": {"seconds": result.wall_clock,
                       "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started or time.time()))},
    }


def write_run(result: ExperimentResult, out_dir, scenario_path=None, oracle: dict | None = None,
              started: float | None = None) -> Path:
    """Write every artifact of ``result`` under ``out_dir``; return the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    for r in result.classes:
        c = r.target_class
        files = {"pool": f"pool-{c}.json", "selection": f"selection-{c}.json", "traces": []}
        (out / files["pool"]).write_text(json.dumps(r.pool.to_dict()))
        sel = {"class": c, "partial": r.selection.partial, "queries": r.selection.queries,
               "entries": r.selection.report(), "selected": r.selection.indices}
        (out / files["selection"]).write_text(json.dumps(sel))
        for restart, trace in sorted(r.pool.traces.items()):
            name = f"trace-{c}-{restart}.jsonl"
            (out / name).write_text("".join(json.dumps(rec) + "\n" for rec in trace))
            files["traces"].append(name)
        artifacts[c] = files
    write_csv(out / "summary.csv", summary_rows(result), SUMMARY_FIELDS)
    manifest = build_manifest(result, scenario_path, oracle, artifacts, started)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path
