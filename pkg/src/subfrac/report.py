"""Aggregate a results ledger (JSON lines) into tables and plot-data files.

One section per (group, norm): a pass/fail matrix by experiment and check,
margin statistics, and CSV series for mu(gamma), lambda_1 against R (with
the fitted log-log slope) and Sobolev ratios. An empty ledger produces the
same files with header rows only.
"""
from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

__all__ = ["load_ledger", "build_report", "write_report"]

MATRIX_FIELDS = ("group", "norm", "experiment", "check_id", "runs", "passed", "failed")
MARGIN_FIELDS = ("group", "norm", "experiment", "check_id", "min_margin", "median_margin",
                 "max_margin")
SLOPE_FIELDS = ("group", "norm", "s", "p", "points", "slope", "expected")


def load_ledger(path) -> list[dict]:
    rows = []
    p = Path(path)
    if not p.exists():
        return rows
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError:
            raise ValueError(f"{path}:{lineno}: not a JSON line") from None
    return rows


def _num(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return float("nan")


def build_report(rows: list[dict]) -> dict:
    """Tables as lists of tuples, keyed by output file name."""
    matrix = defaultdict(lambda: [0, 0])
    margins = defaultdict(list)
    mu = []
    lam = defaultdict(dict)
    sob = []
    for r in rows:
        key = (r.get("group"), r.get("norm"), r.get("experiment"), r.get("check_id"))
        matrix[key][0 if r.get("pass") else 1] += 1
        margins[key].append(_num(r.get("margin")))
        if r.get("check_id") == "mu-positive":
            mu.append((r["group"], r["norm"], r["s"], r["p"], _num(r["param"]), _num(r["rhs"])))
        elif r.get("check_id") == "eigen-lambda1":
            # later runs at the same radius replace earlier ones
            lam[(r["group"], r["norm"], r["s"], r["p"])][_num(r["param"])] = _num(r["rhs"])
        elif r.get("check_id") == "sobolev-ratio":
            sob.append((r["group"], r["norm"], r["s"], r["p"], _num(r["param"]), _num(r["rhs"])))
    tables = {}
    tables["pass_matrix.csv"] = (MATRIX_FIELDS, [
        (*k, sum(v), v[0], v[1]) for k, v in sorted(matrix.items(), key=lambda kv: tuple(map(str, kv[0])))])
    stats = []
    for k in sorted(margins, key=lambda k: tuple(map(str, k))):
        m = np.array([x for x in margins[k] if np.isfinite(x)])
        if len(m):
            stats.append((*k, float(m.min()), float(np.median(m)), float(m.max())))
        else:
            stats.append((*k, "", "", ""))
    tables["margins.csv"] = (MARGIN_FIELDS, stats)
    tables["mu_curve.csv"] = (("group", "norm", "s", "p", "gamma", "mu"), sorted(mu, key=str))
    lam_rows, slope_rows = [], []
    for key in sorted(lam, key=str):
        R = np.array(sorted(lam[key]))
        L = np.array([lam[key][x] for x in R])
        lam_rows += [(*key, float(a), float(b)) for a, b in zip(R, L)]
        slope = float(np.polyfit(np.log(R), np.log(L), 1)[0]) if len(R) >= 2 else ""
        slope_rows.append((key[0], key[1], key[2], key[3], len(R), slope, -key[2] * key[3]))
    tables["lambda_vs_R.csv"] = (("group", "norm", "s", "p", "R", "lambda1"), lam_rows)
    tables["lambda_slopes.csv"] = (SLOPE_FIELDS, slope_rows)
    tables["sobolev_ratios.csv"] = (("group", "norm", "s", "p", "index", "ratio"),
                                    sorted(sob, key=str))
    return tables


def _csv(header, data) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in data:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def _text(rows, tables) -> str:
    lines = [f"ledger rows: {len(rows)}"]
    sections = sorted({(r.get("group"), r.get("norm")) for r in rows}, key=str)
    for grp, nrm in sections:
        lines.append("")
        lines.append(f"== {grp} / {nrm} ==")
        for row in tables["pass_matrix.csv"][1]:
            if row[0] == grp and row[1] == nrm:
                lines.append(f"  {row[2]:<14} {row[3]:<16} {row[5]}/{row[4]} passed")
        for row in tables["lambda_slopes.csv"][1]:
            if row[0] == grp and row[1] == nrm and row[5] != "":
                lines.append(f"  lambda_1 slope (s={row[2]:g}, p={row[3]:g}): {row[5]:.6g} "
                             f"(expected {row[6]:g})")
    return "\n".join(lines) + "\n"


def write_report(ledger, out) -> dict:
    rows = load_ledger(ledger)
    tables = build_report(rows)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, data) in tables.items():
        (out / name).write_text(_csv(header, data))
    (out / "report.txt").write_text(_text(rows, tables))
    return tables
