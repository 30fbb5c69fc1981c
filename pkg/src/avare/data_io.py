"""Dataset ingestion (LIBSVM text, dense CSV) and result serialization.

Floats are written with ``%.17g`` so every value read back is bit-identical
to the one written.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .metrics import TRACE_COLUMNS
from .problems import Dataset

__all__ = [
    "ParseError",
    "LibsvmRecord",
    "parse_libsvm_records",
    "parse_libsvm",
    "serialize_libsvm",
    "dataset_to_libsvm",
    "parse_csv",
    "normalize_features",
    "write_trace_csv",
    "read_trace_csv",
    "write_summary_json",
    "read_summary_json",
    "SCHEMA_VERSION",
    "TRACE_COLUMNS",
]

SCHEMA_VERSION = 1


def fmt(x) -> str:
    return "%.17g" % x


class ParseError(ValueError):
    """Malformed input; ``line`` and ``column`` are 1-based."""

    def __init__(self, msg, line, column):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class LibsvmRecord:
    label: float
    pairs: tuple  # ((index >= 1, value), ...) strictly increasing indices


def _text(source):
    if isinstance(source, (str, bytes)) and not isinstance(source, str):
        return source.decode()
    if hasattr(source, "read"):
        return source.read()
    return source


def _tokens(line):
    """(start column, token) for whitespace-separated tokens."""
    col, out = 0, []
    n = len(line)
    while col < n:
        while col < n and line[col].isspace():
            col += 1
        start = col
        while col < n and not line[col].isspace():
            col += 1
        if col > start:
            out.append((start + 1, line[start:col]))
    return out


def _number(tok, lineno, col, what):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"bad {what} {tok!r}", lineno, col) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite {what} {tok!r}", lineno, col)
    return v


def parse_libsvm_records(source, max_features=None):
    """Parse ``label idx:val idx:val ...`` lines; ``#`` starts a comment."""
    records = []
    for lineno, raw in enumerate(_text(source).splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        col, tok = toks[0]
        label = _number(tok, lineno, col, "label")
        pairs, last = [], 0
        for col, tok in toks[1:]:
            head, sep, tail = tok.partition(":")
            if not sep or not head or not tail:
                raise ParseError(f"expected index:value, got {tok!r}", lineno, col)
            if not head.isdigit():
                raise ParseError(f"bad feature index {head!r}", lineno, col)
            idx = int(head)
            if idx < 1:
                raise ParseError("feature indices start at 1", lineno, col)
            if idx <= last:
                raise ParseError(f"feature index {idx} not increasing (previous {last})", lineno, col)
            if max_features is not None and idx > max_features:
                raise ParseError(f"feature index {idx} exceeds max_features={max_features}", lineno, col)
            val = _number(tail, lineno, col + len(head) + 1, "feature value")
            pairs.append((idx, val))
            last = idx
        records.append(LibsvmRecord(label, tuple(pairs)))
    return records


def _remap_labels(raw):
    classes = sorted(set(raw))
    lookup = {c: k for k, c in enumerate(classes)}
    return np.array([lookup[v] for v in raw], dtype=np.int64), classes


def parse_libsvm(source, max_features=None) -> Dataset:
    """LIBSVM text to a dense :class:`Dataset`.

    Labels are mapped to ``0..K-1`` in sorted order of the raw values, so
    ``{-1, +1}`` becomes ``{0, 1}``. The feature dimension is the largest
    index seen, or ``max_features`` when given.
    """
    records = parse_libsvm_records(source, max_features)
    if not records:
        raise ParseError("no data lines", 1, 1)
    d = max_features or max((r.pairs[-1][0] for r in records if r.pairs), default=1)
    Z = np.zeros((len(records), d))
    for row, rec in enumerate(records):
        for idx, val in rec.pairs:
            Z[row, idx - 1] = val
    y, classes = _remap_labels([r.label for r in records])
    return Dataset(Z, y, K=max(2, len(classes)))


def serialize_libsvm(records) -> str:
    lines = []
    for rec in records:
        parts = [fmt(rec.label)] + [f"{i}:{fmt(v)}" for i, v in rec.pairs]
        lines.append(" ".join(parts))
    return "".join(line + "\n" for line in lines)


def dataset_to_libsvm(data: Dataset) -> str:
    records = []
    for z, y in zip(data.features, data.labels):
        nz = np.flatnonzero(z)
        records.append(LibsvmRecord(float(y), tuple((int(j) + 1, float(z[j])) for j in nz)))
    return serialize_libsvm(records)


def parse_csv(source, label_column=0, header=None) -> Dataset:
    """Dense CSV, one example per row.

    ``header=None`` auto-detects a header row (any non-numeric field in the
    first row). Labels are remapped like :func:`parse_libsvm`.
    """
    rows = list(csv.reader(io.StringIO(_text(source))))
    rows = [(k, r) for k, r in enumerate(rows, start=1) if r and any(f.strip() for f in r)]
    if not rows:
        raise ParseError("no data rows", 1, 1)
    if header is None:
        try:
            [float(f) for f in rows[0][1]]
            header = False
        except ValueError:
            header = True
    if header:
        rows = rows[1:]
    if not rows:
        raise ParseError("header but no data rows", 1, 1)
    width = len(rows[0][1])
    if width < 2:
        raise ParseError("need a label column and at least one feature", rows[0][0], 1)
    lc = label_column % width
    data = np.empty((len(rows), width))
    for r, (lineno, fields) in enumerate(rows):
        if len(fields) != width:
            raise ParseError(f"expected {width} fields, got {len(fields)}", lineno, 1)
        for c, f in enumerate(fields):
            data[r, c] = _number(f.strip(), lineno, c + 1, "field")
    y, classes = _remap_labels(data[:, lc].tolist())
    Z = np.delete(data, lc, axis=1)
    return Dataset(Z, y, K=max(2, len(classes)))


def normalize_features(Z, mode="none"):
    """``none``, ``standardize`` (per feature) or ``unit_norm`` (per row)."""
    Z = np.asarray(Z, dtype=np.float64)
    if mode == "none":
        return Z.copy()
    if mode == "standardize":
        mean = Z.mean(axis=0)
        std = Z.std(axis=0)
        return (Z - mean) / np.where(std > 0, std, 1.0)
    if mode == "unit_norm":
        n = np.linalg.norm(Z, axis=1, keepdims=True)
        return Z / np.where(n > 0, n, 1.0)
    raise ValueError(f"unknown normalization {mode!r}")


# -- results ---------------------------------------------------------------


def write_trace_csv(path, columns, names=TRACE_COLUMNS):
    """Write equal-length columns (dict or RunRecord) with a header row."""
    if hasattr(columns, "columns"):
        columns = columns.columns()
    names = list(names)
    cols = [np.asarray(columns[n]) for n in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0]
    body = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(len(rows) - 1, len(names))
    return {n: body[:, k] for k, n in enumerate(names)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_summary_json(path, summary):
    doc = {"schema_version": SCHEMA_VERSION, **_jsonable(summary)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_summary_json(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported summary schema {doc.get('schema_version')!r}")
    return doc


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
