"""Plain-text persistence: series files with a JSON header, tables and records.

Every writer goes through ``atomic_write_text`` so concurrent workers never
leave partially written files behind.
"""

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParameterError

__all__ = [
    "atomic_write_text",
    "write_json",
    "read_json",
    "write_series",
    "read_series",
    "write_returns",
    "read_returns",
    "write_table",
    "read_table",
    "format_float",
]


def atomic_write_text(path, text):
    """Write ``text`` to a sibling temp file, then rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    # NaN/inf are not valid JSON; map them to null
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    atomic_write_text(path, dumps(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def format_float(v):
    v = float(v)
    return "nan" if not math.isfinite(v) else f"{v:.17g}"


def write_series(path, values, header=None, integer=False):
    """One value per line after a single ``# {json}`` header line."""
    lines = ["# " + json.dumps(_clean(header or {}), sort_keys=True)]
    if integer:
        lines.extend(str(int(v)) for v in values)
    else:
        lines.extend(format_float(v) for v in values)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_series(path):
    """Return ``(values, header)`` of a file written by ``write_series``.

    Files without a header, or with several whitespace separated columns,
    are accepted; only the first column is read.
    """
    header = {}
    values = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if not values and body.startswith("{"):
                    header = json.loads(body)
                continue
            values.append(float(line.split()[0]))
    if not values:
        raise ParameterError(f"{path}: no numeric values")
    return np.asarray(values, dtype=float), header


def write_returns(path, series):
    header = {"kind": "returns", "raw_std": series.raw_std,
              "params": series.params.to_dict(),
              "diagnostics": {k: v for k, v in series.diagnostics.items() if k != "book"}}
    write_series(path, series.values, header)


def read_returns(path):
    from .simulator import ModelParams, ReturnSeries

    values, header = read_series(path)
    params = ModelParams.from_dict(header["params"]) if "params" in header else None
    return ReturnSeries(values=values, raw_std=float(header.get("raw_std", float("nan"))),
                        params=params, diagnostics=header.get("diagnostics", {}))


def write_table(path, columns, rows):
    """Tab-separated table with a ``#``-prefixed column header."""
    lines = ["# " + "\t".join(columns)]
    for row in rows:
        lines.append("\t".join(v if isinstance(v, str) else format_float(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_table(path):
    """Return ``(columns, rows)``; numeric cells become floats."""
    columns = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if columns is None:
                    columns = line[1:].strip().split("\t")
                continue
            cells = []
            for c in line.split("\t"):
                try:
                    cells.append(float(c))
                except ValueError:
                    cells.append(c)
            rows.append(cells)
    return columns or [], rows
