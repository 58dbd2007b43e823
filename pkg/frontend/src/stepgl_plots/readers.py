"""Parsers for the stepgl output formats (grid dumps, CSV tables, JSON lines).

This package is a read-only consumer: it never recomputes physics, it only
parses the documented file formats and renders them.  Schema violations
raise SchemaError naming the offending column or header field.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["SchemaError", "EmptyInputError", "read_grid", "read_csv", "read_records"]

_GRID_TAG = "# stepgl-grid v1"


class SchemaError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


def read_grid(path) -> tuple[str, dict, dict]:
    """Grid dump: header-tagged text planes from stepgl's export format."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise SchemaError(f"{path}: unreadable: {exc}") from exc
    if len(lines) < 5 or lines[0] != _GRID_TAG:
        raise SchemaError(f"{path}: missing grid format tag {_GRID_TAG!r}")
    for k, prefix in ((1, "# kind: "), (2, "# meta: "), (3, "# fields: "), (4, "# shape: ")):
        if not lines[k].startswith(prefix):
            raise SchemaError(f"{path}: header line {k + 1} must start with {prefix!r}")
    kind = lines[1].removeprefix("# kind: ")
    try:
        meta = json.loads(lines[2].removeprefix("# meta: "))
    except ValueError as exc:
        raise SchemaError(f"{path}: meta is not valid JSON: {exc}") from exc
    names = lines[3].removeprefix("# fields: ").split()
    try:
        d1, d2 = (int(v) for v in lines[4].removeprefix("# shape: ").split())
    except ValueError as exc:
        raise SchemaError(f"{path}: bad shape header: {exc}") from exc
    body = lines[5:]
    if len(body) != len(names) * d1:
        raise SchemaError(f"{path}: expected {len(names) * d1} data rows, "
                          f"found {len(body)}")
    try:
        data = np.array([[float(v) for v in line.split()] for line in body])
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric data: {exc}") from exc
    if data.size == 0 or data.shape[1] != d2:
        raise SchemaError(f"{path}: data width does not match shape header")
    fields = {name: data[k * d1:(k + 1) * d1] for k, name in enumerate(names)}
    return kind, meta, fields


def read_csv(path, required: list[str] | None = None) -> dict:
    """CSV table as {column: array}; numeric columns become float arrays."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise SchemaError(f"{path}: unreadable: {exc}") from exc
    if not lines:
        raise EmptyInputError(f"{path}: empty file")
    columns = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:] if line.strip()]
    if not rows:
        raise EmptyInputError(f"{path}: table has no data rows")
    if any(len(r) != len(columns) for r in rows):
        raise SchemaError(f"{path}: ragged rows do not match the header")
    if required:
        missing = [c for c in required if c not in columns]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    table = {}
    for k, name in enumerate(columns):
        values = [r[k] for r in rows]
        try:
            table[name] = np.array([float(v) for v in values])
        except ValueError:
            table[name] = np.array(values)
    return table


def read_records(path, command: str | None = None) -> list[dict]:
    """stepgl records.jsonl, optionally filtered by command."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise SchemaError(f"{path}: unreadable: {exc}") from exc
    records = []
    for ln, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except ValueError as exc:
            raise SchemaError(f"{path}:{ln}: invalid JSON record: {exc}") from exc
        if "command" not in rec:
            raise SchemaError(f"{path}:{ln}: record lacks the 'command' field")
        if command is None or rec["command"] == command:
            records.append(rec)
    if not records:
        raise EmptyInputError(f"{path}: no matching records")
    return records
