#!/usr/bin/env python3
"""Run every configured experiment through the CLI and summarize verdicts.

Usage: python scripts/run_all.py [output-root]

Each experiment reads its config from configs/ and writes results.csv,
summary.txt, and resolved.cfg under <output-root>/<experiment>/.
"""
import os
import pathlib
import sys
import time

from filterjet.cli import run

HERE = pathlib.Path(__file__).resolve().parent.parent

JOBS = [
    ("simulate", "configs/simulate.cfg"),
    ("check-derivs", "configs/check-derivs.cfg"),
    ("forgetting", "configs/forgetting.cfg"),
    ("ergodicity", "configs/ergodicity.cfg"),
    ("loglik", "configs/loglik.cfg"),
    ("rml", "configs/rml.cfg"),
    ("assumptions", "configs/assumptions-compact.cfg"),
    ("assumptions", "configs/assumptions-gaussian.cfg"),
]


def main() -> int:
    root = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else HERE / "out"
    failures = 0
    for experiment, config in JOBS:
        tag = pathlib.Path(config).stem
        os.environ["FILTERJET_OUTDIR"] = str(root / tag)
        started = time.time()
        code = run(experiment, str(HERE / config))
        status = {0: "PASS", 1: "FAIL", 2: "CONFIG-ERROR", 3: "NUMERICAL-ABORT"}.get(code, "?")
        print(f"[{status}] {tag} ({time.time() - started:.1f}s) -> {root / tag}")
        failures += code != 0
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
