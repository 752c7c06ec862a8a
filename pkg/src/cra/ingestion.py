"""Load column-series CSV data and prepare it as a design matrix."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class SeriesTable:
    """Rows are time steps, columns are series."""

    values: np.ndarray
    labels: list | None = None
    dropped_rows: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be two-dimensional")
        if self.values.shape[0] < 2:
            raise ValueError("a series table needs at least 2 rows")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values contain missing or non-finite entries")
        if self.labels is not None and len(self.labels) != self.values.shape[1]:
            raise ValueError("one label per column is required")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]


def load_csv(path, header=True, delimiter=","):
    """Read a header + numeric-body CSV into a :class:`SeriesTable`.

    Rows with any blank cell are dropped (with a warning). A non-numeric cell
    raises ``ValueError`` naming its 1-based line and column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = [r for r in reader if r]
    labels = None
    start = 1
    if header:
        if not rows:
            raise ValueError(f"{path}: file is empty")
        labels = [c.strip() for c in rows[0]]
        rows = rows[1:]
        start = 2
    width = len(labels) if labels is not None else (len(rows[0]) if rows else 0)
    data, dropped = [], 0
    for i, row in enumerate(rows):
        line = i + start
        if len(row) != width:
            raise ValueError(f"{path}: line {line} has {len(row)} cells, expected {width}")
        cells = [c.strip() for c in row]
        if any(c == "" for c in cells):
            dropped += 1
            continue
        vals = []
        for j, c in enumerate(cells):
            try:
                v = float(c)
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell {c!r} at line {line}, column {j + 1}") from None
            if not math.isfinite(v):
                raise ValueError(f"{path}: non-finite cell {c!r} at line {line}, column {j + 1}")
            vals.append(v)
        data.append(vals)
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} row(s) with missing cells", stacklevel=2)
    if len(data) < 2:
        raise ValueError(f"{path}: fewer than 2 complete rows remain")
    return SeriesTable(np.array(data, dtype=np.float64), labels, dropped)


def write_csv(table, path):
    """Write ``table`` (header + 17-digit body); :func:`load_csv` reads it back exactly."""
    labels = table.labels or [f"x{j}" for j in range(table.p)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(labels)
        for row in table.values:
            w.writerow([format(float(v), ".17g") for v in row])
    return path


def detrend(values, method="linear"):
    """Remove a per-column least-squares trend: ``none``, ``mean`` or ``linear``."""
    V = np.asarray(values, dtype=np.float64)
    if method == "none":
        return V.copy()
    n = V.shape[0]
    if method == "mean":
        basis = np.ones((n, 1))
    elif method == "linear":
        basis = np.column_stack([np.ones(n), np.arange(n, dtype=np.float64)])
    else:
        raise ValueError(f"unknown detrend method {method!r}")
    Q, _ = np.linalg.qr(basis)
    R = V - Q @ (Q.T @ V)
    return R - Q @ (Q.T @ R)  # second pass keeps the residual orthogonal to rounding


def preprocess(table, detrend_method="linear", zero_tol=1e-10):
    """Detrend every series and scale it to norm ``sqrt(n)``.

    Columns that vanish after detrending (relative norm below ``zero_tol``)
    are dropped with a warning.

    Returns
    -------
    values : ndarray, shape (n, p_kept)
    labels : list or None
        Labels of the kept columns, in their original order.
    """
    if table.n < 3 and detrend_method == "linear":
        raise ValueError("linear detrending needs at least 3 observations")
    V = detrend(table.values, detrend_method)
    norms = np.linalg.norm(V, axis=0)
    scale = np.maximum(np.linalg.norm(table.values, axis=0), 1.0)
    keep = norms > zero_tol * scale
    if not np.all(keep):
        warnings.warn(f"dropped {int((~keep).sum())} column(s) that are zero after detrending",
                      stacklevel=2)
    V = V[:, keep] * (math.sqrt(table.n) / norms[keep])
    labels = None if table.labels is None else [l for l, k in zip(table.labels, keep) if k]
    return V, labels
