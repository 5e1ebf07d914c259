"""CSV and summary emission with reproducible formatting."""
from __future__ import annotations

import os
from dataclasses import dataclass


def format_value(value) -> str:
    """Full-precision decimal text: 17 significant digits for floats."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class Check:
    """One summary criterion: a label, a printable statement, a verdict."""

    name: str
    statement: str
    passed: bool


def write_summary(path, checks) -> bool:
    ok = all(c.passed for c in checks)
    lines = [
        f"{c.name}: {c.statement} -> {'PASS' if c.passed else 'FAIL'}" for c in checks
    ]
    lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return ok


def ensure_outdir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
