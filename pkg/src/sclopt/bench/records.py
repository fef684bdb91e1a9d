"""Run records (JSON lines) and per-iteration trace CSVs."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, asdict, fields

from ..core import RunTrace, TraceRecord

RECORD_KEYS = ("problem", "solver", "iters", "prox_calls", "seconds", "residual", "converged")


@dataclass
class RunRecord:
    """Summary of one solver run on one problem."""

    problem: str
    solver: str
    iters: int
    prox_calls: int
    seconds: float
    residual: float
    converged: bool
    status: str = ""
    final_F: float = math.nan
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.seconds < 0:
            raise ValueError("elapsed time must be nonnegative")
        if not (self.residual >= 0 or math.isnan(self.residual)):
            raise ValueError("residual must be nonnegative")

    @classmethod
    def from_trace(cls, problem, trace: RunTrace, residual, options=None, final_F=None):
        return cls(problem=problem, solver=trace.solver, iters=trace.iterations,
                   prox_calls=trace.prox_calls, seconds=trace.elapsed,
                   residual=float(residual), converged=bool(trace.converged),
                   status=trace.status,
                   final_F=float(final_F) if final_F is not None else math.nan,
                   options=dict(options or {}))

    def to_json(self) -> str:
        d = asdict(self)
        for k in ("residual", "final_F", "seconds"):
            if isinstance(d[k], float) and not math.isfinite(d[k]):
                d[k] = None
        return json.dumps(d, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        d = json.loads(line)
        missing = [k for k in RECORD_KEYS if k not in d]
        if missing:
            raise ValueError(f"run record missing fields: {', '.join(missing)}")
        known = {f.name for f in fields(cls)}
        kw = {k: v for k, v in d.items() if k in known}
        for k in ("residual", "final_F"):
            if kw.get(k) is None and k in kw:
                kw[k] = math.nan
        return cls(**kw)


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_records(path, records):
    atomic_write_text(path, "".join(r.to_json() + "\n" for r in records))


def read_records(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(RunRecord.from_json(line))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


TRACE_COLUMNS = [f.name for f in fields(TraceRecord)]


def trace_csv(trace: RunTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for rec in trace.records:
        row = []
        for name in TRACE_COLUMNS:
            v = getattr(rec, name)
            row.append(repr(float(v)) if isinstance(v, float) else str(v))
        w.writerow(row)
    return buf.getvalue()


def write_trace_csv(path, trace: RunTrace):
    atomic_write_text(path, trace_csv(trace))
