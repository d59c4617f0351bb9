"""CSV/JSON serialization of grid functions, run reports and sweep tables.

Floats are written with 17 significant digits and JSON keys are sorted, so
identical runs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .lattice import GridFunction, Lattice

SCHEMA_VERSION = 1


def clean(obj):
    """Recursively convert numpy values to plain Python and non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def _fmt(x: float) -> str:
    return repr(float(x)) if np.isfinite(x) else str(clean(float(x)))


def grid_csv_text(u: GridFunction) -> str:
    lat = u.lattice
    buf = io.StringIO()
    buf.write(",".join(["i"] + [f"x{a}" for a in range(lat.dim)] + ["value"]) + "\n")
    for i, (x, v) in enumerate(zip(lat.coords, u.values)):
        buf.write(",".join([str(i)] + [_fmt(c) for c in x] + [_fmt(v)]) + "\n")
    return buf.getvalue()


def write_grid(path: str | Path, u: GridFunction, config: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>`` (CSV) and ``<path>.json`` (lattice, far field, config echo)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(grid_csv_text(u))
    side = write_json(path.with_suffix(path.suffix + ".json"),
                      {"schema_version": SCHEMA_VERSION, "lattice": u.lattice.to_dict(),
                       "far_field": u.far_field.to_dict(), "config": config})
    return path, side


def read_grid_csv(path: str | Path, lattice: Lattice) -> np.ndarray:
    """Node values from a CSV with columns i, x0[, x1], value; every node must appear once."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"grid file {path} does not exist")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "value" not in rows[0]:
        raise ValidationError(f"{path}: expected a header with a 'value' column")
    vals = np.full(lattice.size, np.nan)
    for line, row in enumerate(rows, start=2):
        try:
            if "i" in row and row["i"] not in (None, ""):
                i = int(row["i"])
            else:
                pt = [float(row[f"x{a}"]) for a in range(lattice.dim)]
                i = int(lattice.index_of(pt)[0])
            v = float(row["value"])
        except (TypeError, ValueError, KeyError) as exc:
            raise ValidationError(f"{path}, line {line}: {exc}") from None
        if not 0 <= i < lattice.size:
            raise ValidationError(f"{path}: row refers to node {i}, which is not on the lattice")
        vals[i] = v
    if np.any(np.isnan(vals)):
        raise ValidationError(f"{path}: {int(np.isnan(vals).sum())} nodes have no value")
    return vals


def rows_csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        out = []
        for c in columns:
            v = row.get(c, "")
            if isinstance(v, (float, np.floating)):
                out.append(_fmt(v))
            elif isinstance(v, (bool, np.bool_)):
                out.append("true" if v else "false")
            elif v is None:
                out.append("")
            else:
                out.append(str(v).replace(",", ";"))
        buf.write(",".join(out) + "\n")
    return buf.getvalue()


def write_rows(path: str | Path, rows: list[dict], columns: list[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_csv_text(rows, columns))
    return path
