"""Acceptance suite: one PASS/FAIL line per criterion 1 to 13.

The full ``verify`` command runs twice on the reference configuration. Every
check below re-derives its verdict from the CSV rows with tolerances pinned
here, independently of the pass flags written by the suites.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python3 tests/test_acceptance.py``.
"""

import re
from pathlib import Path

import numpy as np
import pytest

from hilbert_ou import calibration as cal
from hilbert_ou import cli
from hilbert_ou.report import read_csv
from hilbert_ou.suites import CRITERIA

REPORTS = ("semigroup", "commutator", "identities", "transport")
FLOOR_MAX = 1e-10  # largest rounding or discretization floor accepted next to 3 SE
T = 1.0
LINES: dict[int, str] = {}


def _run(out: Path) -> tuple[int, dict]:
    code = cli.main(["verify", "--out", str(out)])
    rows = []
    for name in REPORTS:
        rows += read_csv(out / f"{name}.csv")
    return code, {"rows": rows, "summary": (out / "summary.txt").read_text(), "dir": out}


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    a = _run(tmp_path_factory.mktemp("run_a"))
    b = _run(tmp_path_factory.mktemp("run_b"))
    return a, b


@pytest.fixture(scope="module")
def report(runs):
    (code, rep), _ = runs
    assert code == 0, rep["summary"]
    return rep


def select(rep, experiment, pattern=""):
    rx = re.compile(pattern)
    return [r for r in rep["rows"] if r["experiment"].startswith(experiment) and rx.search(r["quantity"])]


def within_3se(rows):
    return all(abs(r["estimate"]) <= 3 * r["standard_error"] + r["bound"] and r["bound"] <= FLOOR_MAX for r in rows)


def at_most(rows, limit):
    return all(r["estimate"] <= limit for r in rows)


def record(k, ok, detail):
    LINES[k] = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, LINES[k]


def test_c01_ou_algebra(report):
    ulps = select(report, "c01.ou_algebra", "ulps")
    comp = select(report, "c01.ou_algebra", "tau\\(s\\) tau\\(t\\)")
    ok = len(ulps) == 1 and len(comp) == 1 and at_most(ulps, 4) and at_most(comp, 1e-12)
    record(1, ok, f"{ulps[0]['estimate']:g} ulps, composition rel err {comp[0]['estimate']:.2e}")


def test_c02_rotation(report):
    z = select(report, "c02.rotation", "max \\|z\\|")
    eps = {re.search(r"eps=([\d.]+)", r["quantity"]).group(1) for r in z}
    ok = len(z) == 8 and eps == {"0.05", "0.5"} and at_most(z, 4)
    record(2, ok, f"max |z| {max(r['estimate'] for r in z):.2f} over moments 1-4, eps 0.05 and 0.5")


def test_c03_mehler_density(report):
    md = select(report, "c03", "Mehler - density")
    norm = select(report, "c03", "E rho")
    ok = len(md) == 18 and len(norm) == 3 and within_3se(md) and within_3se(norm)
    worst = max(abs(r["estimate"]) / r["standard_error"] for r in md + norm)
    record(3, ok, f"6 functions x 3 eps, worst |diff|/SE {worst:.2f}")


def test_c04_density_gradients(report):
    rows = select(report, "c04", "rel err")
    ok = len(rows) >= 2 and at_most(rows, 1e-6)
    record(4, ok, f"max rel err {max(r['estimate'] for r in rows):.2e}")


def test_c05_smoothing(report):
    (slope,) = select(report, "c05", "fitted slope")
    ok = abs(slope["estimate"]) <= 0.1
    record(5, ok, f"slope {slope['estimate'] - 0.5:.4f} (target -0.5 +/- 0.1)")


def test_c06_commutator_representation(report):
    direct = select(report, "c06", "direct - ")
    split = select(report, "c06", "B2 - ")
    draws = {r["quantity"].split(",")[0] for r in direct}
    eps = {re.search(r"eps=([\d.e-]+)", r["quantity"]).group(1) for r in direct}
    ok = len(draws) == 20 and len(eps) == 3 and len(direct) == len(split) == 60 and within_3se(direct + split)
    record(6, ok, f"20 draws x 3 eps, max |residual| {max(abs(r['estimate']) for r in direct + split):.2e}")


def test_c07_commutator_bound(report):
    ratio = select(report, "c07", "vs frozen C")
    dec = select(report, "c07", "decrease")
    lin = select(report, "c07", "linear pair")
    eps = {re.search(r"eps=([\d.e-]+)", r["quantity"]).group(1) for r in ratio}
    ok = (
        {"0.4", "0.01"} <= eps
        and at_most(ratio, cal.SWEEP_C)
        and len(dec) > 0
        and all(r["estimate"] >= 3 for r in dec)
        and len(lin) > 0
        and at_most(lin, 1e-3)
    )
    record(7, ok, f"max ratio {max(r['estimate'] for r in ratio):.4f} <= C {cal.SWEEP_C}, min decrease {min(r['estimate'] for r in dec):.1f} SE, linear rel err {max(r['estimate'] for r in lin):.1e}")


def test_c08_operator_bound(report):
    (grid,) = select(report, "c08", "5x5 grid")
    formula = select(report, "c08", "explicit-matrix|single factor")
    ok = grid["estimate"] <= cal.OPERATOR_C and len(formula) == 2 and at_most(formula, 1e-12)
    record(8, ok, f"max sup*eps*sqrt(xi) {grid['estimate']:.6f} <= C {cal.OPERATOR_C}, formula vs scan {max(r['estimate'] for r in formula):.1e}")


def test_c09_gaussian_identities(report):
    mc = select(report, "c09.exp_quadratic", "closed form - MC")
    sym = {r["quantity"].split(",")[0] for r in mc if r["quantity"].startswith("sym")}
    nonsym = {r["quantity"].split(",")[0] for r in mc if r["quantity"].startswith("nonsym")}
    s = select(report, "c09.exp_quadratic", "S\\(0\\)|S'\\(0\\)")
    exact = select(report, "c09.exp_quadratic", "Tr Ms")
    mom_mc = select(report, "c09.moments_mc", "- MC")
    fourth = [r for r in mom_mc if "fourth" in r["quantity"]]
    ok = (
        len(sym) == 10
        and len(nonsym) == 3
        and within_3se(mc)
        and len(s) == 26
        and at_most(s, 1e-8)
        and len(exact) == 26
        and at_most(exact, 1e-12)
        and len(fourth) == 1
        and within_3se(mom_mc)
        and "single" in report["summary"] and "fourth central moment" in report["summary"]
    )
    record(9, ok, f"10 sym + 3 nonsym forms, S checks max {max(r['estimate'] for r in s):.1e}, single-trace note present")


def test_c10_divergence_bound(report):
    rows = select(report, "c10", "vs frozen C_p")
    ps = {}
    for r in rows:
        p = float(re.search(r"p=([\d.]+)", r["quantity"]).group(1))
        ps.setdefault(p, []).append(r)
    ok = set(ps) == {1.5, 2.0, 3.0} and all(at_most(v, cal.DIVQ_C[p]) for p, v in ps.items())
    record(10, ok, "; ".join(f"p={p}: max {max(r['estimate'] for r in v):.4f} <= {cal.DIVQ_C[p]}" for p, v in sorted(ps.items())))


def test_c11_transport(report):
    res = select(report, "c11.backward_residual", "max residual over 64 probes")
    mp = select(report, "c11.backward_residual", "vs T")
    weak = select(report, "c11.weak_residual", "weak residual")
    fields = {r["quantity"].split(",")[0] for r in weak}
    (frozen,) = select(report, "c11.weak_residual", "frozen")
    ok = (
        len(res) == 5
        and at_most(res, 1e-3)
        and len(mp) == 5
        and at_most(mp, T * (1 + 1e-6))
        and all(len([r for r in weak if r["quantity"].startswith(f)]) == 12 for f in fields)
        and within_3se(weak)
        and frozen["estimate"] >= 5
    )
    record(11, ok, f"residual max {max(r['estimate'] for r in res):.1e}, max principle {max(r['estimate'] for r in mp):.4f}, {len(weak)} weak rows, frozen control {frozen['estimate']:.3g} SE")


def test_c12_range_probe(report):
    dec = select(report, "c12", "total decrease")
    total = select(report, "c12", "\\|\\|total\\|\\|")
    eps = [float(re.search(r"eps=([\d.e-]+)", r["quantity"]).group(1)) for r in total]
    dims = {re.search(r"n=(\d+)", r["quantity"]).group(1) for r in total}
    vals = [r["estimate"] for r in total]
    ok = (
        eps[0] == 0.4
        and eps[-1] == 0.01
        and len(dims) == 1
        and np.all(np.diff(vals) < 0)
        and len(dec) == len(total) - 1
        and all(r["estimate"] >= 3 for r in dec)
    )
    record(12, ok, f"total {vals[0]:.4g} -> {vals[-1]:.4g}, min decrease {min(r['estimate'] for r in dec):.1f} SE")


def test_c13_determinism(runs):
    (ca, a), (cb, b) = runs
    same = [(a["dir"] / f"{n}.csv").read_bytes() == (b["dir"] / f"{n}.csv").read_bytes() for n in REPORTS]
    ok = ca == cb == 0 and all(same) and a["summary"] == b["summary"]
    record(13, ok, f"{sum(same)} of {len(REPORTS)} CSV reports byte-identical across two runs")


def test_summary_certifies_properties(report):
    m = re.search(r"certified properties: (\d+) of (\d+)", report["summary"])
    assert m and int(m.group(1)) >= 10 and int(m.group(2)) == len(CRITERIA)
    assert report["summary"].rstrip().endswith("ALL PASS")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
