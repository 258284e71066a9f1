"""File formats.

Matrix container (little-endian)::

    offset  size  field
    0       4     magic b"HNMF"
    4       2     format version (uint16, currently 1)
    6       8     rows (uint64)
    14      8     cols (uint64)
    22      8*r*c row-major float64 values

Files ending in ``.csv`` hold the same matrix as text: a header row of
column names, then one sample per line.

Labels and predictions are CSV (``sampleId,classId`` and
``sampleId,predictedClass,abstained``). The hierarchy export is JSON lines,
one node per line. Reports are JSON documents.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "DataError",
    "MAGIC",
    "FORMAT_VERSION",
    "write_matrix",
    "read_matrix",
    "write_labels",
    "read_labels",
    "write_mask",
    "read_mask",
    "write_predictions",
    "read_predictions",
    "write_hierarchy",
    "read_hierarchy",
    "write_report",
    "read_report",
    "read_config",
]

MAGIC = b"HNMF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHQQ")


class DataError(ValueError):
    """Malformed or inconsistent input file."""


def _is_csv(path) -> bool:
    return str(path).lower().endswith(".csv")


def write_matrix(path, X, column_names=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("matrix must be 2-d")
    path = Path(path)
    if _is_csv(path):
        names = list(column_names) if column_names is not None else [f"f{j}" for j in range(X.shape[1])]
        if len(names) != X.shape[1]:
            raise ValueError("column_names length does not match matrix width")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for row in X:
                w.writerow([repr(float(v)) for v in row])
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, X.shape[0], X.shape[1]))
        fh.write(np.ascontiguousarray(X, dtype="<f8").tobytes())


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    if _is_csv(path):
        return _read_matrix_csv(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).astype(np.float64)


def _read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def _read_int_csv(path, columns):
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[: len(columns)]] != list(columns):
            raise DataError(f"{path}:1: expected header {','.join(columns)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
            try:
                out.append([int(v) for v in row[: len(columns)]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return np.array(out, dtype=np.int64).reshape(-1, len(columns))


def write_labels(path, labels):
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sampleId", "classId"])
        for i, c in enumerate(labels):
            w.writerow([i, int(c)])


def read_labels(path) -> np.ndarray:
    data = _read_int_csv(path, ("sampleId", "classId"))
    if not np.array_equal(data[:, 0], np.arange(len(data))):
        raise DataError(f"{path}: sampleId must run 0..n-1 in order")
    return data[:, 1].copy()


def write_mask(path, mask):
    mask = np.asarray(mask, dtype=bool)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sampleId", "known"])
        for i, v in enumerate(mask):
            w.writerow([i, int(v)])


def read_mask(path) -> np.ndarray:
    data = _read_int_csv(path, ("sampleId", "known"))
    return data[:, 1].astype(bool)


def write_predictions(path, pred):
    pred = np.asarray(pred, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sampleId", "predictedClass", "abstained"])
        for i, c in enumerate(pred):
            w.writerow([i, int(c), int(c == -1)])


def read_predictions(path) -> np.ndarray:
    data = _read_int_csv(path, ("sampleId", "predictedClass", "abstained"))
    return data[:, 1].copy()


def write_hierarchy(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=False) + "\n")


def read_hierarchy(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: {exc.msg}") from None
    return out


def write_report(path, report: dict):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise DataError(f"{path}:{lineno}: empty key")
            out[key.replace("-", "_")] = value
    return out
