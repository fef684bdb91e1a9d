"""Solver x problem benchmark matrix on a bounded thread pool."""

from __future__ import annotations

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from ..core import NonFiniteError, fixed_point_residual, objective_value
from ..prox import Metric
from ..solvers import SOLVERS, SolverError, SolverOptions
from .records import RunRecord, write_records

log = logging.getLogger(__name__)

THREADS_ENV = "SCLOPT_THREADS"


def worker_count(requested=None):
    """Pool size: ``requested`` or the CPU count, capped by ``SCLOPT_THREADS``."""
    n = requested or os.cpu_count() or 1
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if cap < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1")
        n = min(n, cap)
    return max(1, n)


def run_one(problem, solver, opts: SolverOptions = None, x0=None):
    """Run one solver and summarise it.

    Returns ``(x, trace, record)``.  Solver failures are captured in the
    record (``converged=False``) rather than raised; ``x`` and ``trace`` are
    then whatever the solver had reached (``trace`` may be ``None``).
    """
    opts = opts or SolverOptions()
    fn = SOLVERS[solver]
    x0 = np.zeros(problem.dimension) if x0 is None else np.asarray(x0, dtype=float)
    try:
        x, trace = fn(problem, x0, opts)
    except SolverError as exc:
        x, trace = exc.x, exc.trace
        log.warning("%s on %s failed: %s", solver, problem.name, exc)
    except (NonFiniteError, ArithmeticError) as exc:
        log.warning("%s on %s failed: %s", solver, problem.name, exc)
        rec = RunRecord(problem.name, solver, 0, 0, 0.0, float("nan"), False,
                        status=f"error: {exc}", options=opts.snapshot())
        return x0, None, rec
    x = x0 if x is None else x
    try:
        res = fixed_point_residual(problem, x, Metric.identity(problem.dimension))
        F = objective_value(problem, x)
    except (NonFiniteError, ArithmeticError):
        res, F = float("nan"), float("nan")
    if trace is None:
        rec = RunRecord(problem.name, solver, 0, 0, 0.0, res, False,
                        status="error", final_F=F, options=opts.snapshot())
    else:
        rec = RunRecord.from_trace(problem.name, trace, res, opts.snapshot(), F)
    return x, trace, rec


def run_matrix(problems, solvers=tuple(SOLVERS), opts: SolverOptions = None,
               out_path=None, workers=None):
    """Run every solver on every problem.

    Records come back ordered by (problem, solver) regardless of completion
    order.  When ``out_path`` is given the JSONL file is rewritten atomically
    after each completed run, so readers never see a partial record.
    """
    opts = opts or SolverOptions()
    jobs = [(i, j) for i in range(len(problems)) for j in range(len(solvers))]
    results = {}
    lock = threading.Lock()

    def task(ij):
        i, j = ij
        _, _, rec = run_one(problems[i], solvers[j], replace(opts))
        with lock:
            results[ij] = rec
            if out_path is not None:
                write_records(out_path, [results[k] for k in sorted(results)])
        return rec

    with ThreadPoolExecutor(max_workers=worker_count(workers)) as pool:
        list(pool.map(task, jobs))
    return [results[k] for k in sorted(results)]
