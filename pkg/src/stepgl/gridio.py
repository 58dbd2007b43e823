"""Self-describing text grid files and deterministic CSV/JSON-lines output.

Grid files carry a comment header (format tag, mesh kind, JSON metadata,
field names, shape) followed by row-major values, one grid row per line,
with %.17g formatting so reload is bit-identical.  All writers are
deterministic functions of their inputs: no timestamps live in any data
payload.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = [
    "CorruptGridFileError",
    "export_grid",
    "load_grid",
    "write_csv",
    "append_record",
]

_FORMAT_TAG = "stepgl-grid v1"


class CorruptGridFileError(RuntimeError):
    def __init__(self, path, reason):
        super().__init__(f"corrupt grid file {path}: {reason}")
        self.path = str(path)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _open_for_write(path, mode="w"):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        return open(path, mode)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_grid(path, kind: str, meta: dict, fields: dict) -> None:
    """Write named 2D planes (all of one shape) with a self-describing header."""
    names = list(fields)
    arrays = [np.asarray(fields[n], dtype=float) for n in names]
    shape = arrays[0].shape
    if len(shape) != 2 or any(a.shape != shape for a in arrays):
        raise ValueError("all field planes must share one 2D shape")
    with _open_for_write(path) as fh:
        fh.write(f"# {_FORMAT_TAG}\n")
        fh.write(f"# kind: {kind}\n")
        fh.write(f"# meta: {json.dumps(meta, sort_keys=True)}\n")
        fh.write(f"# fields: {' '.join(names)}\n")
        fh.write(f"# shape: {shape[0]} {shape[1]}\n")
        for a in arrays:
            for row in a:
                fh.write(" ".join(_fmt(v) for v in row))
                fh.write("\n")


def load_grid(path):
    """Read a grid file back as (kind, meta, {name: plane}).

    Truncated or malformed files raise CorruptGridFileError naming the path.
    """
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CorruptGridFileError(path, f"unreadable: {exc}") from exc
    if len(lines) < 5 or lines[0] != f"# {_FORMAT_TAG}":
        raise CorruptGridFileError(path, "missing or wrong format tag")
    try:
        kind = lines[1].removeprefix("# kind: ")
        meta = json.loads(lines[2].removeprefix("# meta: "))
        names = lines[3].removeprefix("# fields: ").split()
        d1, d2 = (int(v) for v in lines[4].removeprefix("# shape: ").split())
    except (ValueError, IndexError) as exc:
        raise CorruptGridFileError(path, f"malformed header: {exc}") from exc
    body = lines[5:]
    expected = len(names) * d1
    if len(body) != expected:
        raise CorruptGridFileError(
            path, f"expected {expected} data rows, found {len(body)}")
    try:
        data = np.array([[float(v) for v in line.split()] for line in body])
    except ValueError as exc:
        raise CorruptGridFileError(path, f"non-numeric data: {exc}") from exc
    if data.shape != (expected, d2):
        raise CorruptGridFileError(
            path, f"row width mismatch: expected {d2} columns")
    fields = {name: data[k * d1:(k + 1) * d1] for k, name in enumerate(names)}
    return kind, meta, fields


def write_csv(path, columns: list[str], rows) -> None:
    """Plain deterministic CSV (floats at full precision, no quoting needed)."""
    with _open_for_write(path) as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            out = []
            for c in columns:
                v = row[c] if isinstance(row, dict) else row[columns.index(c)]
                if isinstance(v, float):
                    out.append(_fmt(v))
                else:
                    out.append(str(v))
            fh.write(",".join(out) + "\n")


def append_record(path, record: dict) -> None:
    """Append one JSON-lines record (sorted keys; no timestamps in the payload)."""
    with _open_for_write(path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
