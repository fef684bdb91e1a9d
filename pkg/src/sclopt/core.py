"""Problem instances, oracle contracts and run traces shared by all solvers.

Objectives have the composite form ``F(x) = f(x) + g(x)`` where ``f`` is a
smooth self-concordant-like function exposed through a :class:`SmoothOracle`
and ``g`` is a proximable convex term (see :mod:`sclopt.prox`).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .prox import Metric, NonsmoothTerm


class NonFiniteError(FloatingPointError):
    """Raised when an oracle produces a non-finite value.

    ``where`` names the quantity (``"value"``, ``"grad"``, ...) and ``index``
    the first offending entry, if any.
    """

    def __init__(self, where, index=None, detail=""):
        self.where = where
        self.index = index
        msg = f"non-finite {where}"
        if index is not None:
            msg += f" at index {index}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


def check_finite(arr, where):
    """Return ``arr`` unchanged, raising :class:`NonFiniteError` if needed."""
    a = np.asarray(arr)
    if a.ndim == 0:
        if not np.isfinite(a):
            raise NonFiniteError(where)
        return arr
    bad = ~np.isfinite(a)
    if bad.any():
        raise NonFiniteError(where, int(np.flatnonzero(bad.ravel())[0]))
    return arr


class SmoothOracle:
    """Smooth convex part ``f`` of the objective.

    Subclasses implement :meth:`value`, :meth:`grad` and :meth:`hess_vec`
    and set ``dim`` and ``M_f``.  A dense Hessian is optional; oracles that
    provide it set ``has_dense_hessian = True``.
    """

    dim: int
    M_f: float = 0.0
    has_dense_hessian: bool = False

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def value_grad(self, x):
        return self.value(x), self.grad(x)

    def hess_vec(self, x, v):
        raise NotImplementedError

    def hess_dense(self, x):
        raise NotImplementedError(f"{type(self).__name__} has no dense Hessian")

    def hess_operator(self, x):
        """Return ``v -> hess_vec(x, v)`` with any per-point work cached."""
        return lambda v: self.hess_vec(x, v)


@dataclass(frozen=True)
class ProblemInstance:
    """Composite problem ``min f(x) + g(x)`` over ``R^n``."""

    oracle: SmoothOracle
    nonsmooth: "NonsmoothTerm"
    name: str = "problem"

    def __post_init__(self):
        if self.oracle.M_f < 0:
            raise ValueError("M_f must be nonnegative")
        gdim = getattr(self.nonsmooth, "dim", None)
        if gdim is not None and gdim != self.oracle.dim:
            raise ValueError(
                f"dimension mismatch: oracle {self.oracle.dim}, nonsmooth {gdim}")

    @property
    def dimension(self) -> int:
        return self.oracle.dim


@dataclass
class IterateState:
    x: np.ndarray
    s: np.ndarray
    k: int = 0

    @property
    def d(self):
        return self.s - self.x


@dataclass
class TraceRecord:
    k: int
    F_value: float
    alpha: float
    lam: float
    r: float
    beta: float
    residual: float
    elapsed_seconds: float
    prox_call_count: int
    accepted: bool = True
    L: float = float("nan")


@dataclass
class RunTrace:
    """Per-iteration history of one solver run.

    Records with ``accepted=False`` are metric-shrink iterations where the
    iterate did not move.  ``iterates`` is filled only when the solver was
    asked to keep them (needed by :func:`sclopt.solvers.rate_diagnostics`).
    """

    solver: str = ""
    records: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    converged: bool = False
    status: str = "running"
    initial_F: float = float("nan")
    shrinks: int = 0
    sigma: Optional[float] = None

    def append(self, rec: TraceRecord):
        if self.records and rec.k <= self.records[-1].k:
            raise ValueError("trace iteration counter must increase")
        self.records.append(rec)

    def accepted(self):
        return [r for r in self.records if r.accepted]

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def prox_calls(self) -> int:
        return self.records[-1].prox_call_count if self.records else 0

    @property
    def elapsed(self) -> float:
        return self.records[-1].elapsed_seconds if self.records else 0.0

    @property
    def final_residual(self) -> float:
        return self.records[-1].residual if self.records else float("nan")

    def column(self, name, accepted_only=False):
        recs = self.accepted() if accepted_only else self.records
        return np.array([getattr(r, name) for r in recs], dtype=float)

    def as_rows(self):
        return [asdict(r) for r in self.records]


def objective_value(p: ProblemInstance, x):
    """Return ``F(x) = f(x) + g(x)``.

    Raises :class:`NonFiniteError` when either term overflows.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (p.dimension,):
        raise ValueError(f"expected vector of length {p.dimension}, got {x.shape}")
    fval = check_finite(p.oracle.value(x), "f value")
    gval = p.nonsmooth.value(x)
    if np.isnan(gval):
        raise NonFiniteError("g value")
    return float(fval + gval)


def fixed_point_residual(p: ProblemInstance, x, metric: "Metric", tol=1e-12):
    """Norm of ``x - prox_{H,g}(x - H^{-1} grad f(x))``.

    Zero exactly at points with ``0 in grad f(x) + dg(x)``.
    """
    from .prox import scaled_prox

    x = np.asarray(x, dtype=float)
    u = metric.matvec(x) - p.oracle.grad(x)
    z = scaled_prox(p.nonsmooth, metric, u, tol, z0=x)
    return float(np.linalg.norm(x - z))
