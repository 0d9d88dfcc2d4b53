"""Turn persisted run records into plot-ready CSV tables."""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..stats import ConditionResult, normalized_mse_ecdf, pairwise_matrix
from .config import condition_id
from .runner import CSV_COLUMNS, MANIFEST_FILE, RECORDS_FILE

REPORT_KINDS = ("ecdf", "pairwise", "learning_curve", "summary_table")


def load_records(records_dir: str | Path) -> tuple[list[dict], dict]:
    """Read ``records.csv`` and ``manifest.json`` from a run directory."""
    d = Path(records_dir)
    manifest = json.loads((d / MANIFEST_FILE).read_text())
    rows = []
    with open(d / RECORDS_FILE, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
        for row in reader:
            row["replicate"] = int(row["replicate"])
            for k in ("estimate", "truth", "sq_error", "wall_ms"):
                row[k] = float(row[k])
            row["chosen_param"] = float(row["chosen_param"]) if row["chosen_param"] else None
            rows.append(row)
    return rows, manifest


def _check_complete(rows: list[dict], manifest: dict) -> None:
    reps = manifest["config"]["replicates"]
    methods = manifest["methods"]
    counts = defaultdict(int)
    for r in rows:
        counts[r["condition_id"]] += 1
    expected = reps * len(methods)
    for entry in manifest["conditions"]:
        cid = entry["condition_id"]
        if counts.get(cid, 0) != expected:
            raise ValueError(
                f"condition {cid} has {counts.get(cid, 0)} records, expected {expected}")


def condition_results(rows: list[dict]) -> list[ConditionResult]:
    grouped: dict = defaultdict(list)
    for r in rows:
        grouped[(r["condition_id"], r["method"])].append((r["replicate"], r["sq_error"]))
    out = []
    for (cid, m), vals in grouped.items():
        vals.sort()
        out.append(ConditionResult(cid, m, np.array([v for _, v in vals])))
    return out


def ecdf_rows(rows: list[dict]) -> list[list]:
    table = normalized_mse_ecdf(condition_results(rows))
    out = [["method", "x", "y"]]
    for m, (xs, ys) in table.items():
        out.extend([m, repr(float(x)), repr(float(y))] for x, y in zip(xs, ys))
    return out


def pairwise_rows(rows: list[dict], alpha: float = 0.05) -> list[list]:
    mat = pairwise_matrix(condition_results(rows), alpha=alpha)
    out = [["method"] + list(mat.methods)]
    for m, row in zip(mat.methods, mat.fractions):
        out.append([m] + [repr(float(v)) for v in row])
    out.append(["column_mean"] + [repr(float(v)) for v in mat.column_means])
    return out


def learning_curve_rows(rows: list[dict], manifest: dict) -> list[list]:
    """MSE against ``n`` per method, with bars at two standard errors of the MSE."""
    params = {c["condition_id"]: c["params"] for c in manifest["conditions"]}
    grouped: dict = defaultdict(list)
    for r in rows:
        p = params[r["condition_id"]]
        curve = condition_id({k: v for k, v in p.items() if k != "n"})
        grouped[(curve, int(p["n"]), r["method"])].append(r["sq_error"])
    out = [["curve", "n", "method", "mse", "two_se", "lower", "upper"]]
    for (curve, n, m) in sorted(grouped):
        sq = np.asarray(grouped[(curve, n, m)])
        mse = float(sq.mean())
        two_se = float(2 * sq.std(ddof=1) / np.sqrt(sq.size)) if sq.size > 1 else 0.0
        out.append([curve, n, m, repr(mse), repr(two_se), repr(mse - two_se), repr(mse + two_se)])
    return out


def summary_rows(rows: list[dict]) -> list[list]:
    grouped: dict = defaultdict(list)
    order = []
    for r in rows:
        key = (r["condition_id"], r["method"])
        if key not in grouped:
            order.append(key)
        grouped[key].append(r)
    out = [["condition_id", "method", "replicates", "mse", "mean_estimate", "truth", "mean_chosen_param"]]
    for key in order:
        g = grouped[key]
        chosen = [r["chosen_param"] for r in g if r["chosen_param"] is not None]
        out.append([
            key[0],
            key[1],
            len(g),
            repr(float(np.mean([r["sq_error"] for r in g]))),
            repr(float(np.mean([r["estimate"] for r in g]))),
            repr(g[0]["truth"]),
            repr(float(np.mean(chosen))) if chosen else "",
        ])
    return out


def report(records_dir: str | Path, kind: str, out_file: str | Path, alpha: float = 0.05) -> Path:
    """Write the table for ``kind`` (one of :data:`REPORT_KINDS`) as CSV."""
    if kind not in REPORT_KINDS:
        raise ValueError(f"unknown report kind {kind!r}")
    rows, manifest = load_records(records_dir)
    _check_complete(rows, manifest)
    if kind == "ecdf":
        table = ecdf_rows(rows)
    elif kind == "pairwise":
        table = pairwise_rows(rows, alpha)
    elif kind == "learning_curve":
        table = learning_curve_rows(rows, manifest)
    else:
        table = summary_rows(rows)
    out = Path(out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(table)
    return out
