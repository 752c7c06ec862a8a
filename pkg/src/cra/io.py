"""CSV/JSON serialization with lossless (17 significant digit) floats."""
from __future__ import annotations

import csv
import hashlib
import json
import math

import numpy as np


def fmt(v):
    """Format a scalar for CSV: ints verbatim, floats with 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def write_table(rows, path, columns=None):
    """Write a list of dicts as CSV with a fixed column order."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row.get(c, "")) for c in columns])
    return path


def read_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_matrix(path, M):
    """Headerless numeric CSV, one matrix row per line (vectors become one column)."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    with open(path, "w", newline="") as fh:
        for row in M:
            fh.write(",".join(format(float(v), ".17g") for v in row))
            fh.write("\n")
    return path


def read_matrix(path):
    M = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return M


def read_vector(path):
    return read_matrix(path).reshape(-1)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def digest(*arrays):
    """SHA-256 over the raw bytes of the given arrays / scalars."""
    h = hashlib.sha256()
    for a in arrays:
        arr = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()
