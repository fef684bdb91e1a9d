"""LIBSVM / svmlight text format.

Grammar, one sample per line::

    <label> [<index>:<value> ...] [# comment]

Indices are 1-based in the file and must be strictly increasing within a
line.  Blank lines and comment-only lines are ignored.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class LibsvmParseError(ValueError):
    """Malformed input; ``line`` and ``column`` are 1-based."""

    def __init__(self, message, line, column):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


@dataclass(frozen=True)
class SparseDataset:
    """Rows as ``(indices, values)`` pairs with 0-based indices.

    ``labels`` are floats; binary data is normalised to ``-1/+1`` by
    :func:`parse_libsvm`.
    """

    rows: tuple
    labels: np.ndarray
    feature_count: int

    def __post_init__(self):
        if len(self.rows) != len(self.labels):
            raise ValueError("rows and labels differ in length")
        for idx, val in self.rows:
            if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0):
                raise ValueError("indices must be nonnegative and strictly increasing")
            if idx.size and idx[-1] >= self.feature_count:
                raise ValueError("index beyond feature_count")
            if not np.all(np.isfinite(val)):
                raise ValueError("non-finite value")

    def __len__(self):
        return len(self.rows)

    @property
    def n_samples(self):
        return len(self.rows)

    def to_csr(self, n_features=None) -> sp.csr_matrix:
        n_features = self.feature_count if n_features is None else n_features
        indptr = np.zeros(len(self.rows) + 1, dtype=np.int64)
        for i, (idx, _) in enumerate(self.rows):
            indptr[i + 1] = indptr[i] + idx.size
        if self.rows:
            indices = np.concatenate([r[0] for r in self.rows]).astype(np.int64)
            data = np.concatenate([r[1] for r in self.rows]).astype(float)
        else:
            indices = np.zeros(0, dtype=np.int64)
            data = np.zeros(0)
        return sp.csr_matrix((data, indices, indptr), shape=(len(self.rows), n_features))

    def is_binary(self):
        return set(np.unique(self.labels)).issubset({-1.0, 1.0})

    def __eq__(self, other):
        if not isinstance(other, SparseDataset):
            return NotImplemented
        if self.feature_count != other.feature_count or len(self) != len(other):
            return False
        if not np.array_equal(self.labels, other.labels):
            return False
        return all(np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
                   for a, b in zip(self.rows, other.rows))

    __hash__ = None


def _parse_number(tok, line, col, what):
    try:
        v = float(tok)
    except ValueError:
        raise LibsvmParseError(f"invalid {what} {tok!r}", line, col) from None
    if not math.isfinite(v):
        raise LibsvmParseError(f"non-finite {what} {tok!r}", line, col)
    return v


def _tokens(text):
    """Yield ``(token, column)`` for whitespace-separated tokens."""
    col = 0
    n = len(text)
    while col < n:
        while col < n and text[col] in " \t\r\f\v":
            col += 1
        start = col
        while col < n and text[col] not in " \t\r\f\v":
            col += 1
        if col > start:
            yield text[start:col], start + 1


def parse_libsvm(data, normalize_labels=True) -> SparseDataset:
    """Parse LIBSVM text (``str`` or ``bytes``).

    With ``normalize_labels`` a label set contained in ``{0, 1}`` is mapped to
    ``{-1, +1}``.

    Raises
    ------
    LibsvmParseError
        On any malformed token, a zero or negative index, or indices that are
        not strictly increasing.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            line = data[:exc.start].count(b"\n") + 1
            col = exc.start - (data.rfind(b"\n", 0, exc.start) + 1) + 1
            raise LibsvmParseError("invalid UTF-8", line, col) from None
    rows = []
    labels = []
    nfeat = 0
    for lineno, raw in enumerate(data.split("\n"), start=1):
        body = raw.split("#", 1)[0]
        toks = list(_tokens(body))
        if not toks:
            continue
        (lab_tok, lab_col), feats = toks[0], toks[1:]
        if ":" in lab_tok:
            raise LibsvmParseError("missing label", lineno, lab_col)
        labels.append(_parse_number(lab_tok, lineno, lab_col, "label"))
        idx = np.empty(len(feats), dtype=np.int64)
        val = np.empty(len(feats))
        prev = 0
        for j, (tok, col) in enumerate(feats):
            head, sep, tail = tok.partition(":")
            if not sep or not head or not tail:
                raise LibsvmParseError(f"expected index:value, got {tok!r}", lineno, col)
            if not head.isdigit():
                raise LibsvmParseError(f"invalid index {head!r}", lineno, col)
            k = int(head)
            if k < 1:
                raise LibsvmParseError("indices are 1-based", lineno, col)
            if k <= prev:
                raise LibsvmParseError(f"index {k} not greater than {prev}", lineno, col)
            prev = k
            idx[j] = k - 1
            val[j] = _parse_number(tail, lineno, col + len(head) + 1, "value")
        nfeat = max(nfeat, prev)
        rows.append((idx, val))
    y = np.asarray(labels, dtype=float)
    if normalize_labels and y.size and set(np.unique(y)) <= {0.0, 1.0}:
        y = np.where(y > 0, 1.0, -1.0)
    return SparseDataset(tuple(rows), y, nfeat)


def _fmt_value(v):
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def _fmt_label(v, binary):
    if binary:
        return "+1" if v > 0 else "-1"
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def serialize(ds: SparseDataset) -> str:
    """Canonical text form: one line per row, shortest round-trip floats."""
    binary = ds.is_binary()
    out = []
    for (idx, val), lab in zip(ds.rows, ds.labels):
        parts = [_fmt_label(lab, binary)]
        parts += [f"{i + 1}:{_fmt_value(v)}" for i, v in zip(idx, val)]
        out.append(" ".join(parts))
    return "".join(line + "\n" for line in out)


def load_libsvm(path, **kw) -> SparseDataset:
    with open(path, "rb") as fh:
        return parse_libsvm(fh.read(), **kw)


def save_libsvm(ds: SparseDataset, path):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write(serialize(ds))
    os.replace(tmp, path)


def from_dense(X, y) -> SparseDataset:
    """Build a dataset from a dense or sparse matrix, dropping zeros."""
    A = sp.csr_matrix(X)
    A.eliminate_zeros()
    A.sort_indices()
    rows = tuple((A.indices[A.indptr[i]:A.indptr[i + 1]].astype(np.int64),
                  A.data[A.indptr[i]:A.indptr[i + 1]].astype(float))
                 for i in range(A.shape[0]))
    return SparseDataset(rows, np.asarray(y, dtype=float), A.shape[1])
