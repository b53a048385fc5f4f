"""Strict readers for the artifact CSV/JSON schemas the plot scripts consume.

Pure consumers: no metric is computed here. Any schema violation exits
nonzero naming the offending column or file.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path


def fail(msg: str) -> None:
    print(f"schema error: {msg}", file=sys.stderr)
    raise SystemExit(2)


def read_csv(path, required: list[str], optional: list[str] | None = None) -> list[dict]:
    path = Path(path)
    if not path.exists():
        fail(f"input not found: {path}")
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                fail(f"{path}: missing column {col!r} (found {header})")
        allowed = set(required) | set(optional or [])
        for col in header:
            if col not in allowed:
                fail(f"{path}: unexpected column {col!r}")
        return list(reader)


def parse_float(row: dict, col: str, path) -> float:
    try:
        return float(row[col])
    except (TypeError, ValueError):
        fail(f"{path}: column {col!r} has non-numeric value {row.get(col)!r}")


def read_summary_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        fail(f"input not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        fail(f"{path}: invalid JSON ({e})")
    if "success_rate" not in payload:
        fail(f"{path}: missing key 'success_rate'")
    return payload
