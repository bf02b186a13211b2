"""Preprocessing of price/rate series and of vector samples.

* price series -> log-returns ``log(S[j+1] / S[j])``;
* rate series -> first differences with repeated values dropped;
* d-dimensional sample ``X_i = Y_i * Z_i`` -> projections ``<X_i, e>``, which
  form a one-dimensional scale mixture ``Y_i * <Z_i, e>``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "SeriesFrame",
    "CsvReadResult",
    "log_returns",
    "diff_dedup",
    "project",
    "random_direction",
    "read_series_csv",
    "read_vectors_csv",
    "write_column_csv",
]


@dataclass(frozen=True)
class SeriesFrame:
    values: tuple[float, ...]
    timestamps: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series values must be finite")
        if self.timestamps is not None and len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values differ in length")

    def __len__(self):
        return len(self.values)


def _frame(frame) -> SeriesFrame:
    return frame if isinstance(frame, SeriesFrame) else SeriesFrame(tuple(frame))


def log_returns(frame) -> np.ndarray:
    frame = _frame(frame)
    if len(frame) < 2:
        raise ValueError("need at least two prices")
    s = np.asarray(frame.values)
    if np.any(s <= 0):
        raise ValueError("prices must be strictly positive")
    return np.log(s[1:] / s[:-1])


def diff_dedup(frame) -> np.ndarray:
    """First differences, keeping only the first occurrence of each value.

    Equality is on the bit pattern, with no tolerance.
    """
    frame = _frame(frame)
    if len(frame) < 2:
        raise ValueError("need at least two observations")
    d = np.diff(np.asarray(frame.values))
    _, first = np.unique(d.view(np.uint64), return_index=True)
    return d[np.sort(first)]


def random_direction(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on the unit sphere in R^d."""
    while True:
        e = rng.standard_normal(d)
        norm = np.linalg.norm(e)
        if norm > 0:
            return e / norm


def project(vectors, direction: Sequence[float] | None = None, seed: int | None = None) -> np.ndarray:
    """Inner products ``<X_i, e>``; ``e`` is drawn at random when not given."""
    x = np.asarray(vectors, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("vectors must form an (n, d) array")
    d = x.shape[1]
    if direction is None:
        e = random_direction(d, np.random.default_rng(seed))
    else:
        e = np.asarray(direction, dtype=float).ravel()
        if e.size != d:
            raise ValueError(f"direction has dimension {e.size}, vectors have {d}")
        if not np.any(e):
            raise ValueError("direction must be non-zero")
    return x @ e


@dataclass
class CsvReadResult:
    frame: SeriesFrame
    skipped: int
    header: bool


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_series_csv(path, delimiter: str = ",", header: bool | None = None, column: int = -1) -> CsvReadResult:
    """Read a single-column or ``(timestamp, value)`` CSV.

    ``header=None`` sniffs: a first row whose value cell is not numeric is
    taken as a header.  Later rows that fail to parse are skipped and counted.
    """
    values, stamps, skipped = [], [], 0
    has_header = False
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if rows:
        first_cell = rows[0][column].strip() if len(rows[0]) >= abs(column) else ""
        has_header = (not _is_number(first_cell)) if header is None else header
        if has_header:
            rows = rows[1:]
    for row in rows:
        try:
            v = float(row[column])
        except (ValueError, IndexError):
            skipped += 1
            continue
        if not np.isfinite(v):
            skipped += 1
            continue
        values.append(v)
        if len(row) > 1:
            stamps.append(row[0].strip())
    ts = tuple(stamps) if stamps and len(stamps) == len(values) else None
    return CsvReadResult(SeriesFrame(tuple(values), ts), skipped, has_header)


def read_vectors_csv(path, delimiter: str = ",", header: bool | None = None) -> tuple[np.ndarray, int]:
    """Read rows of d numbers; returns the ``(n, d)`` array and the skip count."""
    out, skipped = [], 0
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if rows and (header or (header is None and not all(_is_number(c) for c in rows[0]))):
        rows = rows[1:]
    width = None
    for row in rows:
        try:
            vec = [float(c) for c in row]
        except ValueError:
            skipped += 1
            continue
        if width is None:
            width = len(vec)
        if len(vec) != width:
            raise ValueError(f"row of dimension {len(vec)} among rows of dimension {width}")
        out.append(vec)
    return np.asarray(out, dtype=float).reshape(len(out), width or 0), skipped


def write_column_csv(path_or_file, values, name: str = "x") -> None:
    close = False
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        fh = open(path_or_file, "w", newline="")
        close = True
    else:
        fh = path_or_file
    try:
        out = csv.writer(fh)
        out.writerow([name])
        for v in np.asarray(values, dtype=float).tolist():
            out.writerow([repr(v)])
    finally:
        if close:
            fh.close()
