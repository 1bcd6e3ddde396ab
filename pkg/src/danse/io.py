"""Plot-ready data files. CSV files carry a '#' header (metadata lines, then
the column names) and 17-significant-digit floats, so reading a file back
returns bit-identical arrays. All writes go through a temp file + rename."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % v


def format_value(v) -> str:
    """Short filename-safe rendering of a sweep coordinate."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return ("%.6g" % v).replace("+", "")


def cell_stem(name: str, coords: dict) -> str:
    if not coords:
        return name
    return name + "__" + "_".join(f"{k}={format_value(v)}" for k, v in coords.items())


def write_csv(path, columns: dict, meta: dict | None = None):
    """Columns of equal length; meta values are JSON-encoded in the header."""
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    n = {a.size for a in arrays}
    if len(n) > 1:
        raise ValueError("columns must have equal length")
    lines = []
    for k, v in (meta or {}).items():
        lines.append(f"# {k} = {json.dumps(v, sort_keys=True)}")
    lines.append("# " + ",".join(names))
    for row in zip(*arrays):
        lines.append(",".join(_fmt(x) for x in row))
    atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Returns (columns dict of float arrays, meta dict)."""
    meta = {}
    names = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if " = " in body:
                    k, v = body.split(" = ", 1)
                    meta[k] = json.loads(v)
                else:
                    names = [c.strip() for c in body.split(",")]
            elif line:
                rows.append([float(x) for x in line.split(",")])
    if names is None:
        raise ValueError(f"{path}: missing column header")
    data = np.array(rows, dtype=float).reshape(-1, len(names))
    return {k: data[:, j].copy() for j, k in enumerate(names)}, meta


def write_json(path, columns: dict, meta: dict | None = None):
    doc = {"meta": meta or {}, "columns": {k: [float(x) for x in np.asarray(v)]
                                           for k, v in columns.items()}}
    atomic_write(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_json(path):
    with open(path) as fh:
        doc = json.load(fh)
    return {k: np.array(v, dtype=float) for k, v in doc["columns"].items()}, doc["meta"]


def write_table(path, columns, meta=None, fmt="csv"):
    (write_csv if fmt == "csv" else write_json)(path, columns, meta)


def read_table(path):
    return read_json(path) if str(path).endswith(".json") else read_csv(path)


def write_sidecar(path, doc: dict):
    atomic_write(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")
