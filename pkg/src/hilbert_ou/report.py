"""CSV and summary writers.

Report CSVs hold only seed-determined numbers, so two runs with the same
configuration give byte-identical files.  Wall times go to ``timings.csv``.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .suites import CRITERIA

COLUMNS = ("experiment", "quantity", "estimate", "standard_error", "bound", "pass", "rule")


def fmt(x):
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([r.experiment, r.quantity, fmt(r.estimate), fmt(r.standard_error), fmt(r.bound), int(r.passed), r.rule])
    return buf.getvalue()


def read_csv(path):
    """Rows of a report CSV as dicts with floats and a bool pass flag."""
    with open(path, newline="") as fh:
        out = []
        for d in csv.DictReader(fh):
            for k in ("estimate", "standard_error", "bound"):
                d[k] = float(d[k])
            d["pass"] = d["pass"] == "1"
            out.append(d)
        return out


def criterion_status(rows):
    """``{criterion id: (rows, failures)}`` over the criteria that produced rows."""
    status = {}
    for r in rows:
        cid = r.experiment.split(".")[0]
        n, bad = status.get(cid, (0, 0))
        status[cid] = (n + 1, bad + (not r.passed))
    return status


def summary_text(cfg, results, notes=()):
    """Plain-text summary: certified criteria, failures and notes."""
    rows = [r for rs in results.values() for r in rs]
    status = criterion_status(rows)
    lines = [f"config: {cfg.source}", f"seed: {cfg.seed}", ""]
    certified = [c for c, (_, bad) in sorted(status.items()) if bad == 0]
    lines.append(f"certified properties: {len(certified)} of {len(status)} checked")
    for cid in sorted(status):
        n, bad = status[cid]
        mark = "CERTIFIED" if bad == 0 else f"FAILED ({bad} of {n} rows)"
        lines.append(f"  {cid} {mark:<22} {CRITERIA.get(cid, '')} [{n} rows]")
    failing = [r for r in rows if not r.passed]
    if failing:
        lines += ["", "failing rows:"]
        lines += [f"  {r.experiment} | {r.quantity} | estimate {fmt(r.estimate)} | rule {r.rule}" for r in failing]
    if notes:
        lines += ["", "notes:"] + [f"  - {n}" for n in notes]
    lines.append("")
    lines.append("ALL PASS" if not failing else "FAILURES PRESENT")
    return "\n".join(lines) + "\n"


def write_reports(out_dir, cfg, results, timings, notes=(), summary_name="summary.txt"):
    """Write one CSV per suite, the summary and the timings; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, rows in results.items():
        p = out / f"{name}.csv"
        p.write_text(rows_to_csv(rows))
        paths.append(p)
    s = out / summary_name
    s.write_text(summary_text(cfg, results, notes))
    t = out / "timings.csv"
    t.write_text("experiment,wall_time_s\n" + "".join(f"{n},{dt:.3f}\n" for n, dt in timings))
    return paths + [s, t]
