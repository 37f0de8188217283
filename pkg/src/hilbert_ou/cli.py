"""Command line entry point: ``hilbert-ou <command> [--config PATH] ...``.

Exit status is 0 when every report row passes, 1 when a row fails or a suite
raises, and 2 for an invalid configuration.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from pathlib import Path

from . import suites
from .config import load_config
from .errors import ConfigError, HilbertOUError
from .report import write_reports
from .spectral import WORKERS_ENV

# command -> list of (report name, suite callable)
COMMANDS = {
    "verify": [
        ("semigroup", suites.semigroup_suite),
        ("commutator", suites.commutator_suite),
        ("identities", suites.identities_suite),
        ("transport", suites.transport_suite),
    ],
    "commutator-sweep": [("commutator_sweep", partial(suites.commutator_suite, parts=("c07",)))],
    "identities": [("identities", suites.identities_suite)],
    "transport": [("transport", partial(suites.transport_suite, include_range=False))],
    "range-probe": [("range_probe", suites.range_rows)],
}

HELP = {
    "verify": "run every suite and write one CSV per suite plus summary.txt",
    "commutator-sweep": "commutator norm sweep over the eps grid",
    "identities": "Gaussian quadratic-form identities and the divergence bound",
    "transport": "backward solution, maximum principle and weak-form checks",
    "range-probe": "norm of K_F(P_eps u_n) - f along the eps refinement path",
}


def build_parser():
    p = argparse.ArgumentParser(prog="hilbert-ou", description="Numerical checks for transport equations on Gaussian Hilbert spaces.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", metavar="PATH", help="config file (default: bundled reference)")
        s.add_argument("--seed", type=int, help="override run.seed")
        s.add_argument("--out", metavar="DIR", help="output directory (default: run.out)")
        s.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE", help="set section.key=value; repeatable"
        )
    return p


def _workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1") or 1))
    except ValueError:
        return 1


def _run_one(cfg, fn):
    rec = suites.Recorder()
    fn(cfg, rec)
    return rec


def run(command, cfg):
    """Run the suites of ``command``; returns ``{report name: Recorder}`` in fixed order."""
    jobs = COMMANDS[command]
    if _workers() > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(min(_workers(), len(jobs))) as ex:
            recs = list(ex.map(lambda job: _run_one(cfg, job[1]), jobs))
    else:
        recs = [_run_one(cfg, fn) for _, fn in jobs]
    return {name: rec for (name, _), rec in zip(jobs, recs)}


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.out is not None:
        overrides.append(f"run.out={args.out}")
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        where = args.config or "<reference>"
        print(f"config error in {where}: {exc}", file=sys.stderr)
        return 2
    try:
        recs = run(args.command, cfg)
    except HilbertOUError as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    results = {name: rec.rows for name, rec in recs.items()}
    notes = [n for rec in recs.values() for n in rec.notes]
    timings = [t for rec in recs.values() for t in rec.timings]
    summary = "summary.txt" if args.command == "verify" else f"{COMMANDS[args.command][0][0]}_summary.txt"
    out = Path(cfg["run.out"])
    write_reports(out, cfg, results, timings, notes, summary)
    (out / "config.txt").write_text(cfg.canonical())
    sys.stdout.write((out / summary).read_text())
    ok = all(r.passed for rows in results.values() for r in rows)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
