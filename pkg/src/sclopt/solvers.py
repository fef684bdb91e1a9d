"""Proximal gradient, proximal Newton and proximal BFGS solvers.

All three share the same skeleton: build a metric ``H_k``, solve the
composite quadratic subproblem for ``s_k``, set ``d_k = s_k - x_k`` and move
by an analytic step size.  None of them uses a line search; the gradient
and BFGS variants shrink the metric when the step-size condition fails.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, asdict, field
from typing import Optional

import numpy as np

from .core import ProblemInstance, RunTrace, TraceRecord, objective_value
from .linalg import extreme_eigs, lanczos_extremes
from .prox import Metric, solve_subproblem
from .steps import (
    analytic_step,
    bb_estimate,
    damped_newton_step,
    psi_decrement,
    step_quantities,
)

LOG_4_3 = math.log(4.0 / 3.0)


class SolverError(RuntimeError):
    """A solver aborted; ``trace`` holds the history up to the failure."""

    def __init__(self, message, trace=None, x=None):
        super().__init__(message)
        self.trace = trace
        self.x = x


class ShrinkCapError(SolverError):
    pass


class FormulaDomainError(ValueError):
    pass


@dataclass
class SolverOptions:
    """Knobs shared by the three solvers.

    ``epsilon`` is the termination tolerance on ``beta_k`` (gradient, BFGS)
    or ``lambda_k`` (Newton).  ``initial_L`` seeds the scalar metric
    ``L_0 I``; ``None`` means 1.  Inner subproblem tolerances follow
    ``min(inner_tol_max, inner_tol_factor * lambda_prev)`` times the
    optimality residual ``dist(-grad f(x_k), dg(x_k))``, floored at
    ``inner_tol_floor_factor * epsilon``.
    """

    epsilon: float = 1e-8
    max_iterations: int = 10000
    metric_shrink_factor: float = 0.5
    max_shrinks_per_iteration: int = 60
    sigma_override: Optional[float] = None
    inner_tol_max: float = 0.1
    inner_tol_factor: float = 0.1
    inner_tol_floor_factor: float = 0.01
    initial_L: Optional[float] = None
    L_floor: float = 1e-8
    L_ceil: float = 1e12
    lanczos_iterations: int = 20
    seed: int = 0
    keep_iterates: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1 or self.max_shrinks_per_iteration < 1:
            raise ValueError("iteration caps must be positive")
        if not 0.0 < self.metric_shrink_factor < 1.0:
            raise ValueError("metric_shrink_factor must lie in (0, 1)")
        if self.sigma_override is not None and self.sigma_override <= 0:
            raise ValueError("sigma must be positive")
        if self.initial_L is not None and self.initial_L <= 0:
            raise ValueError("initial_L must be positive")

    def inner_tol(self, prev_lam, scale=1.0):
        """Forcing term ``min(max, factor * lam_prev)`` times ``scale`` (the
        optimality residual at the current iterate), floored."""
        eta = self.inner_tol_max
        if prev_lam is not None:
            eta = min(eta, self.inner_tol_factor * prev_lam)
        return max(eta * scale, self.inner_tol_floor_factor * self.epsilon)

    def clamp_L(self, L):
        return min(max(L, self.L_floor), self.L_ceil)

    def snapshot(self):
        return asdict(self)


@dataclass
class RateDiagnostics:
    sigma_min_star: float
    sigma_max_star: float
    rho_star: float
    restricted_kappa: float
    tail_slope: float
    tail_r2: float
    available: bool = True
    tail_length: int = 0
    notes: list = field(default_factory=list)

    @property
    def kappa(self):
        if self.sigma_min_star <= 0:
            return math.inf
        return self.sigma_max_star / self.sigma_min_star


class _Clock:
    def __init__(self):
        self.t0 = time.perf_counter()

    def __call__(self):
        return time.perf_counter() - self.t0


def _start(p, x0, name, opts):
    x = np.array(x0, dtype=float)
    F0 = objective_value(p, x)
    trace = RunTrace(solver=name, initial_F=F0)
    if opts.keep_iterates:
        trace.iterates.append(x.copy())
    return x, F0, trace


def _finish(trace, converged, status):
    trace.converged = converged
    trace.status = status
    return trace


def _shrink_or_fail(trace, x, shrinks, opts):
    trace.shrinks += 1
    if shrinks > opts.max_shrinks_per_iteration:
        _finish(trace, False, "shrink cap exceeded")
        raise ShrinkCapError(
            f"metric shrunk {opts.max_shrinks_per_iteration} times without "
            f"satisfying the step-size condition", trace, x)


# ---------------------------------------------------------------------------
# proximal gradient


def prox_gradient_solve(p: ProblemInstance, x0, opts: Optional[SolverOptions] = None):
    """Proximal gradient with a scalar variable metric ``D_k = L_k I``.

    ``L_k`` comes from the Barzilai-BenTal rule on successive iterates and
    gradients, clamped to ``[L_floor, L_ceil]``.  A direction failing
    ``beta^2 r <= (e^r - 1) lam^2`` is discarded and ``L_k`` is multiplied by
    ``metric_shrink_factor``.

    Returns ``(x, trace)``.  Reaching ``max_iterations`` returns the last
    iterate with ``trace.converged == False``.

    Raises
    ------
    ShrinkCapError
        If more than ``max_shrinks_per_iteration`` consecutive shrinks occur.
    """
    opts = opts or SolverOptions()
    oracle, g = p.oracle, p.nonsmooth
    n = p.dimension
    x, F, trace = _start(p, x0, "prox-grad", opts)
    clock = _Clock()
    L = opts.clamp_L(opts.initial_L if opts.initial_L is not None else 1.0)
    _, gx = oracle.value_grad(x)
    prox_calls = 0
    shrinks = 0
    for k in range(opts.max_iterations):
        H = Metric.scalar(L, n)
        s = g.prox_diag(x - gx / L, L)
        prox_calls += 1
        d = s - x
        q = step_quantities(d, oracle, x, H)
        if q.beta <= opts.epsilon:
            trace.append(TraceRecord(k, F, 0.0, q.lam, q.r, q.beta, float(np.linalg.norm(d)),
                                     clock(), prox_calls, accepted=False, L=L))
            return x, _finish(trace, True, "converged")
        if q.lam > 0.0:
            step = analytic_step(q)
            holds = step.condition_holds
        else:
            holds = False
        if holds:
            x_new = x + step.alpha * d
            f_new, g_new = oracle.value_grad(x_new)
            F_new = float(f_new + g.value(x_new))
            trace.append(TraceRecord(k, F_new, step.alpha, q.lam, q.r, q.beta,
                                     float(np.linalg.norm(d)), clock(), prox_calls, L=L))
            L = opts.clamp_L(bb_estimate(x_new - x, g_new - gx, fallback=L))
            x, gx, F = x_new, g_new, F_new
            if opts.keep_iterates:
                trace.iterates.append(x.copy())
            shrinks = 0
        else:
            trace.append(TraceRecord(k, F, 0.0, q.lam, q.r, q.beta, float(np.linalg.norm(d)),
                                     clock(), prox_calls, accepted=False, L=L))
            shrinks += 1
            _shrink_or_fail(trace, x, shrinks, opts)
            L = opts.clamp_L(L * opts.metric_shrink_factor)
    return x, _finish(trace, False, "max_iterations")


# ---------------------------------------------------------------------------
# proximal Newton


def default_sigma(p: ProblemInstance, x0, opts: SolverOptions):
    """``log(4/3)`` times a Lanczos estimate of ``sigma_min(hess f(x0))``."""
    op = p.oracle.hess_operator(np.asarray(x0, dtype=float))
    smin, _ = lanczos_extremes(op, p.dimension, k=opts.lanczos_iterations, seed=opts.seed)
    return LOG_4_3 * max(smin, 0.0)


def hessian_metric(oracle, x):
    """Exact Hessian as a metric: dense when available and nonsingular."""
    if oracle.has_dense_hessian:
        try:
            return Metric.dense(oracle.hess_dense(x))
        except ValueError:
            pass
    return Metric.operator(oracle.hess_operator(x), oracle.dim)


def prox_newton_solve(p: ProblemInstance, x0, opts: Optional[SolverOptions] = None):
    """Proximal Newton method with a damped phase and a full-step phase.

    While ``lambda_k > sigma`` the step is ``log(1 + r_k) / r_k``; afterwards
    unit steps are taken.  Terminates when ``lambda_k <= epsilon``.
    """
    opts = opts or SolverOptions()
    oracle = p.oracle
    x, F, trace = _start(p, x0, "prox-newton", opts)
    clock = _Clock()
    sigma = opts.sigma_override if opts.sigma_override is not None else default_sigma(p, x, opts)
    trace.sigma = sigma
    gx = oracle.grad(x)
    prox_calls = 0
    prev_lam = None
    for k in range(opts.max_iterations):
        H = hessian_metric(oracle, x)
        try:
            s, d, info = solve_subproblem(p, x, H, opts.inner_tol(prev_lam, p.nonsmooth.subgradient_residual(x, gx)),
                                          grad=gx,
                                          return_info=True)
        except Exception as exc:
            _finish(trace, False, f"subproblem failed: {exc}")
            raise SolverError(f"Newton subproblem failed at iteration {k}: {exc}",
                              trace, x) from exc
        prox_calls += info["prox_calls"]
        q = step_quantities(d, oracle, x, H, hess_op=H.matvec)
        lam, r = q.lam, q.r
        if lam <= opts.epsilon:
            trace.append(TraceRecord(k, F, 0.0, lam, r, lam, float(np.linalg.norm(d)),
                                     clock(), prox_calls, accepted=False))
            return x, _finish(trace, True, "converged")
        alpha = damped_newton_step(r) if lam > sigma else 1.0
        x = x + alpha * d
        F = objective_value(p, x)
        gx = oracle.grad(x)
        trace.append(TraceRecord(k, F, alpha, lam, r, lam, float(np.linalg.norm(d)),
                                 clock(), prox_calls))
        if opts.keep_iterates:
            trace.iterates.append(x.copy())
        prev_lam = lam
    return x, _finish(trace, False, "max_iterations")


# ---------------------------------------------------------------------------
# proximal BFGS


def bfgs_update(B, s, y):
    """Standard BFGS update of the Hessian approximation, skipped (returning
    ``B`` itself) unless ``<y, s> > 1e-10 ||y|| ||s||``."""
    ys = float(y @ s)
    if ys <= 1e-10 * np.linalg.norm(y) * np.linalg.norm(s):
        return B
    Bs = B @ s
    B_new = B - np.outer(Bs, Bs) / float(s @ Bs) + np.outer(y, y) / ys
    return 0.5 * (B_new + B_new.T)


def prox_quasi_newton_solve(p: ProblemInstance, x0, opts: Optional[SolverOptions] = None):
    """Proximal quasi-Newton method with a dense BFGS metric.

    ``B_0 = L_0 I``; subproblems under the dense metric are solved
    iteratively.  Steps use the same analytic rule and shrink branch as
    :func:`prox_gradient_solve`.  With ``keep_iterates`` the metric used at
    every iteration is stored in ``trace.metrics``.
    """
    opts = opts or SolverOptions()
    oracle = p.oracle
    n = p.dimension
    x, F, trace = _start(p, x0, "prox-bfgs", opts)
    clock = _Clock()
    L0 = opts.clamp_L(opts.initial_L if opts.initial_L is not None else 1.0)
    B = L0 * np.eye(n)
    H = Metric.scalar(L0, n)
    _, gx = oracle.value_grad(x)
    prox_calls = 0
    shrinks = 0
    prev_lam = None
    for k in range(opts.max_iterations):
        if opts.keep_iterates:
            trace.metrics.append(H)
        try:
            s, d, info = solve_subproblem(p, x, H, opts.inner_tol(prev_lam, p.nonsmooth.subgradient_residual(x, gx)),
                                          grad=gx,
                                          return_info=True)
        except Exception as exc:
            _finish(trace, False, f"subproblem failed: {exc}")
            raise SolverError(f"BFGS subproblem failed at iteration {k}: {exc}",
                              trace, x) from exc
        prox_calls += info["prox_calls"]
        q = step_quantities(d, oracle, x, H)
        if q.beta <= opts.epsilon:
            trace.append(TraceRecord(k, F, 0.0, q.lam, q.r, q.beta, float(np.linalg.norm(d)),
                                     clock(), prox_calls, accepted=False))
            return x, _finish(trace, True, "converged")
        holds = False
        if q.lam > 0.0:
            step = analytic_step(q)
            holds = step.condition_holds
        if holds:
            x_new = x + step.alpha * d
            _, g_new = oracle.value_grad(x_new)
            F = objective_value(p, x_new)
            trace.append(TraceRecord(k, F, step.alpha, q.lam, q.r, q.beta,
                                     float(np.linalg.norm(d)), clock(), prox_calls))
            B = bfgs_update(B, x_new - x, g_new - gx)
            H = Metric.bfgs(B)
            x, gx = x_new, g_new
            if opts.keep_iterates:
                trace.iterates.append(x.copy())
            prev_lam = q.lam
            shrinks = 0
        else:
            trace.append(TraceRecord(k, F, 0.0, q.lam, q.r, q.beta, float(np.linalg.norm(d)),
                                     clock(), prox_calls, accepted=False))
            shrinks += 1
            _shrink_or_fail(trace, x, shrinks, opts)
            B = B * opts.metric_shrink_factor
            H = H.scaled(opts.metric_shrink_factor)
    return x, _finish(trace, False, "max_iterations")


SOLVERS = {
    "prox-grad": prox_gradient_solve,
    "prox-newton": prox_newton_solve,
    "prox-bfgs": prox_quasi_newton_solve,
}


# ---------------------------------------------------------------------------
# complexity counts and rate diagnostics


def quadratic_phase_cap(M_f, sigma, eps):
    """``floor(log2(log(2 M_f eps) / log(2 sigma)))``."""
    a, b = 2.0 * M_f * eps, 2.0 * sigma
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise FormulaDomainError("need 0 < 2*M_f*eps < 1 and 0 < 2*sigma < 1")
    return int(math.floor(math.log2(math.log(a) / math.log(b))))


def damped_phase_cap(sigma, gap0):
    """``floor(gap0 / psi(sigma))``."""
    if sigma <= 0 or gap0 < 0:
        raise FormulaDomainError("need sigma > 0 and gap0 >= 0")
    return int(math.floor(gap0 / psi_decrement(sigma)))


def newton_iteration_caps(M_f, sigma, eps, gap0):
    return quadratic_phase_cap(M_f, sigma, eps), damped_phase_cap(sigma, gap0)


def _linear_fit(t, y):
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def rate_diagnostics(p: ProblemInstance, x_star, trace: RunTrace, L_tail,
                     eig_iters=3000, gap_floor=None):
    """Local-rate diagnostics of a run against a reference solution.

    ``restricted_kappa`` is the square root of the max/min ratio of
    ``||hess f(x*) e_k||^2 / ||e_k||^2`` over tail errors ``e_k = x* - x_k``,
    so it is bounded by the condition number of ``hess f(x*)``.  The tail is
    the last quarter of the accepted iterates whose optimality gap is above
    ``gap_floor`` (default ``1e-13 (1 + |F*|)``).
    """
    x_star = np.asarray(x_star, dtype=float)
    op = p.oracle.hess_operator(x_star)
    smin, smax = extreme_eigs(op, p.dimension, iters=eig_iters)
    rho = max(L_tail / smin - 1.0 if smin > 0 else math.inf, 1.0 - L_tail / smax)
    F_star = objective_value(p, x_star)
    floor = 1e-13 * (1.0 + abs(F_star)) if gap_floor is None else gap_floor

    accepted = trace.accepted()
    F_vals = np.array([r.F_value for r in accepted])
    iterates = trace.iterates[1:1 + len(accepted)]
    keep = np.flatnonzero(F_vals - F_star > floor)
    diag = RateDiagnostics(smin, smax, rho, math.nan, math.nan, math.nan)
    if keep.size < 4:
        diag.available = False
        diag.notes.append("fewer than 4 tail iterates above the gap floor")
        return diag
    tail = keep[len(keep) - max(4, len(keep) // 4):]
    diag.tail_length = int(tail.size)
    gaps = np.log(F_vals[tail] - F_star)
    diag.tail_slope, diag.tail_r2 = _linear_fit(tail.astype(float), gaps)

    if len(iterates) >= tail[-1] + 1:
        quotients = []
        for i in tail:
            e = x_star - iterates[i]
            ne = float(e @ e)
            if ne <= 0.0:
                continue
            He = op(e)
            quotients.append(float(He @ He) / ne)
        if len(quotients) >= 2 and min(quotients) > 0:
            diag.restricted_kappa = math.sqrt(max(quotients) / min(quotients))
    else:
        diag.notes.append("trace has no stored iterates; restricted kappa unavailable")
    return diag
