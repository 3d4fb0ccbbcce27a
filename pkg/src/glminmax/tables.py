"""Columnar text tables: a schema comment line, a header row, tab-separated values."""

from __future__ import annotations

import math
from pathlib import Path

TABLE_VERSION = "glminmax-table v1"


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def write_table(path, schema: str, columns, rows, comments=()) -> None:
    lines = [f"# {TABLE_VERSION} {schema}"]
    lines += [f"# {c}" for c in comments]
    lines.append("\t".join(columns))
    lines += ["\t".join(_fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> tuple[str, list[str], list[list[float]], list[str]]:
    """Return (schema, columns, rows, comment lines) of a table file."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(f"# {TABLE_VERSION}"):
        raise ValueError(f"{path}: missing table schema line")
    schema = text[0][len(f"# {TABLE_VERSION}"):].strip()
    comments, body = [], []
    for line in text[1:]:
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif line.strip():
            body.append(line)
    if not body:
        raise ValueError(f"{path}: no header row")
    columns = body[0].split("\t")
    rows = []
    for line in body[1:]:
        vals = line.split("\t")
        if len(vals) != len(columns):
            raise ValueError(f"{path}: row has {len(vals)} fields, expected {len(columns)}")
        rows.append([float(v) for v in vals])
    return schema, columns, rows, comments
