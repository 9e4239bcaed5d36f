"""File formats: dataset CSV, report CSV/JSON and the flat experiment config.

Datasets carry a header row. On the circle the columns are ``theta,z`` with
``theta`` the arc-length coordinate on the unit-circumference circle (taken
mod 1); on a sphere they are the ambient coordinates followed by ``obs``
(``x,y,z,obs`` on S^2), with every site checked to have unit norm.

CSV floats use 17 significant digits and JSON floats the exact round-trip
repr, so a rerun can be compared byte for byte.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile

import numpy as np

from .inference import Dataset
from .spectrum import CIRCLE, ManifoldSpec

__all__ = [
    "UNIT_NORM_TOL",
    "format_float",
    "dataset_columns",
    "load_dataset",
    "dataset_to_csv",
    "save_dataset",
    "records_to_csv",
    "summary_to_json",
    "parse_config_text",
    "load_config",
    "atomic_write",
]

UNIT_NORM_TOL = 1e-12


def format_float(x) -> str:
    return format(float(x), ".17g")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def dataset_columns(m: ManifoldSpec):
    if m.kind == CIRCLE:
        return ["theta", "z"]
    if m.dimension == 2:
        return ["x", "y", "z", "obs"]
    return [f"x{i}" for i in range(m.dimension + 1)] + ["obs"]


def load_dataset(path, m: ManifoldSpec) -> Dataset:
    """Parse a dataset CSV for manifold ``m``; raises ``ValueError`` on any malformed row."""
    if not m.has_addition_kernel:
        raise ValueError(f"datasets need point coordinates; {m.label()} has none")
    cols = dataset_columns(m)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header != cols:
            raise ValueError(f"{path}: header must be {','.join(cols)}, got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(cols):
                raise ValueError(f"{path}:{lineno}: expected {len(cols)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    a = np.array(rows)
    sites, z = a[:, :-1], a[:, -1]
    if m.kind == CIRCLE:
        sites = sites[:, 0]
    else:
        norms = np.linalg.norm(sites, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)
        if bad.size:
            raise ValueError(f"{path}: site on row {bad[0] + 2} has norm {norms[bad[0]]!r}, not 1")
    return Dataset(m, sites, z)


def dataset_to_csv(d: Dataset) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(dataset_columns(d.manifold))
    sites = np.asarray(d.sites).reshape(len(d), -1)
    for s, z in zip(sites, d.observations):
        w.writerow([format_float(v) for v in s] + [format_float(z)])
    return buf.getvalue()


def save_dataset(path, d: Dataset):
    atomic_write(path, dataset_to_csv(d))


def records_to_csv(records, columns=None) -> str:
    """One row per record; columns default to the keys of the first record."""
    if columns is None:
        columns = list(records[0].keys()) if records else []
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isfinite(v):
            return v
        return None if math.isnan(v) else str(v)
    return v


def summary_to_json(summary: dict) -> str:
    """Sorted-key JSON; floats use Python's exact round-trip repr."""
    return json.dumps(_jsonable(summary), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _scalar(text):
    t = text.strip()
    low = t.lower()
    if low in ("none", "null", ""):
        return None
    if low in ("true", "false"):
        return low == "true"
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines (``#`` comments), or a JSON object.

    Comma-separated values (optionally in brackets) become lists.
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad JSON config: {exc}") from None
        if not isinstance(obj, dict):
            raise ValueError("JSON config must be an object")
        return obj
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        if key in out:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        value = value.strip()
        bracketed = value.startswith("[") and value.endswith("]")
        if bracketed:
            value = value[1:-1]
        if bracketed or "," in value:
            out[key] = [_scalar(v) for v in value.split(",") if v.strip()]
        else:
            out[key] = _scalar(value)
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        return parse_config_text(fh.read())


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` via a temporary file so failures leave nothing behind."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
