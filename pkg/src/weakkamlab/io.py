"""CSV and JSON artifacts.

CSV files are comma separated with a header row, 17 significant digits and
LF line endings, so identical inputs give byte-identical files.  JSON
reports are written with sorted keys; non-finite floats become null.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import GridField

SCHEMAS = {
    "solution": ("x", "u", "du"),
    "curve": ("t", "x"),
    "certificate": ("x", "u", "q", "delta"),
    "smooth": ("x", "w", "dw", "eta"),
}


def format_row(values) -> str:
    return ",".join("%.17g" % float(v) for v in values)


def write_csv(path, columns: dict) -> Path:
    names = list(columns)
    cols = [np.asarray(columns[k], dtype=float) for k in names]
    n = cols[0].size
    if any(c.shape != (n,) for c in cols):
        raise ConfigError("CSV columns must be 1-d and of equal length")
    lines = [",".join(names)]
    lines += [format_row(row) for row in zip(*cols)]
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path) -> dict:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ConfigError(f"{path}: empty CSV file")
    names = [s.strip() for s in text[0].split(",")]
    try:
        data = np.array([[float(t) for t in ln.split(",")] for ln in text[1:] if ln.strip()], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(names):
        raise ConfigError(f"{path}: rows do not match the header {names}")
    return {k: data[:, i] for i, k in enumerate(names)}


def read_field(path, column: str | None = None) -> GridField:
    """Load a grid field from CSV; takes ``column`` or the second column (the first is x)."""
    cols = read_csv(path)
    names = list(cols)
    if column is None:
        if len(names) < 2:
            raise ConfigError(f"{path}: need an x column and a value column")
        column = names[1]
    if column not in cols:
        raise ConfigError(f"{path}: no column {column!r}")
    vals = cols[column]
    if "x" in cols:
        x = cols["x"]
        expect = np.arange(x.size) / x.size
        if np.max(np.abs(x - expect)) > 1e-9:
            raise ConfigError(f"{path}: x column is not the uniform grid j/N")
    return GridField(vals)


def solution_table(sol) -> dict:
    return {"x": sol.u.x, "u": sol.u.values, "du": sol.du.values}


def curve_table(curve) -> dict:
    return {"t": curve.t, "x": curve.x}


def certificate_table(cert) -> dict:
    return {"x": cert.u.x, "u": cert.u.values, "q": cert.q.values, "delta": cert.delta.values}


def smooth_table(res) -> dict:
    return {"x": res.w.x, "w": res.w.values, "dw": res.dw.values, "eta": res.eta.values}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Path):
        return str(obj)
    return repr(obj)


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, report: dict) -> Path:
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(report))
    return path
