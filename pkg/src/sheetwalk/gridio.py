"""CSV and JSON grid tables.

CSV: optional ``#`` provenance lines, a header ``axis1,...,axisd,value``, then
one row per grid point in row-major order.  JSON: ``{"params": ..., "grid":
{"axis1": [...], ...}, "values": nested lists}``.  Floats are written with
``repr``, the shortest decimal string that round-trips.
"""
from __future__ import annotations

import io
import itertools
import json
from pathlib import Path

import numpy as np

from . import __version__

FORMATS = ("csv", "json")


class GridIOError(OSError):
    pass


def _fmt(x) -> str:
    return repr(float(x))


def grid_to_csv(axes, values, provenance: dict | None = None) -> str:
    values = np.asarray(values, dtype=float)
    buf = io.StringIO()
    if provenance is not None:
        buf.write("# " + json.dumps(provenance, sort_keys=True) + "\n")
    d = len(axes)
    buf.write(",".join([f"axis{i + 1}" for i in range(d)] + ["value"]) + "\n")
    for idx in itertools.product(*(range(len(a)) for a in axes)):
        coords = [_fmt(axes[i][j]) for i, j in enumerate(idx)]
        buf.write(",".join(coords + [_fmt(values[idx])]) + "\n")
    return buf.getvalue()


def _nested(values):
    if values.ndim == 1:
        return [float(v) for v in values]
    return [_nested(v) for v in values]


def grid_to_json(axes, values, params: dict, provenance: dict | None = None) -> str:
    doc = {
        "params": params,
        "grid": {f"axis{i + 1}": [float(x) for x in a] for i, a in enumerate(axes)},
        "values": _nested(np.asarray(values, dtype=float)),
    }
    if provenance is not None:
        doc["provenance"] = provenance
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_text(path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise GridIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export_grid(axes, values, path, fmt: str, params: dict, provenance: dict | None = None) -> None:
    if fmt == "csv":
        write_text(path, grid_to_csv(axes, values, provenance))
    elif fmt == "json":
        write_text(path, grid_to_json(axes, values, params, provenance))
    else:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")


def read_grid(path):
    """Read a grid written by :func:`export_grid`; returns ``(axes, values)``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise GridIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        doc = json.loads(text)
        d = len(doc["grid"])
        axes = [np.array(doc["grid"][f"axis{i + 1}"]) for i in range(d)]
        return axes, np.array(doc["values"], dtype=float)
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    d = len(header) - 1
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    axes = [np.unique(rows[:, i]) for i in range(d)]
    values = rows[:, d].reshape(tuple(len(a) for a in axes))
    return axes, values


def provenance(config: dict) -> dict:
    return {"artifact": "sheetwalk", "version": __version__, "config": config}
