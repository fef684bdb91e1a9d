"""Step quantities and analytic step sizes.

For a search direction ``d`` at ``x`` with metric ``H``::

    lam  = ||d||_x  = <hess f(x) d, d>^(1/2)
    r    = M_f ||d||_2
    beta = ||d||_H  = <H d, d>^(1/2)

The worst-case decrease along ``d`` is ``psi_k(t) = beta^2 t - lam^2 omega(r t) t^2``
whose maximiser ``(1/r) log(1 + beta^2 r / lam^2)`` is the analytic step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

R_EPS = 1e-9
NEG_CURVATURE_TOL = 1e-10


class NonConvexError(ArithmeticError):
    pass


class SingularCurvatureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class StepQuantities:
    lam: float
    r: float
    beta: float


@dataclass(frozen=True)
class StepResult:
    alpha: float
    condition_holds: bool
    predicted_decrease: float


def _omega_series(tau):
    # sum_k tau^k / (k+2)!
    term = 0.5
    total = 0.5
    for k in range(1, 30):
        term *= tau / (k + 2)
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
    return total


def omega(tau):
    """``(e^tau - tau - 1) / tau^2``, continuous at 0 with value 1/2."""
    if abs(tau) < 0.5:
        return _omega_series(tau)
    return (math.expm1(tau) - tau) / (tau * tau)


def gamma_factor(tau):
    """``(e^tau - 1) / tau`` with limit 1 at 0."""
    if tau == 0.0:
        return 1.0
    return math.expm1(tau) / tau


def psi_decrement(tau):
    """``psi(tau) = tau * ((1 + 1/tau) log(1 + tau) - 1) = (1+tau) log(1+tau) - tau``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau < 0.1:
        # sum_{k>=2} (-1)^k tau^k / (k (k-1))
        total = 0.0
        power = -tau
        for k in range(2, 40):
            power *= -tau
            term = power / (k * (k - 1))
            total += term
            if abs(term) < 1e-18 * abs(total):
                break
        return total
    return (1.0 + tau) * math.log1p(tau) - tau


def step_quantities(d, oracle, x, H, hess_op=None):
    """Compute ``(lam, r, beta)`` with a single Hessian-vector product."""
    d = np.asarray(d, dtype=float)
    hv = hess_op(d) if hess_op is not None else oracle.hess_vec(x, d)
    curv = float(hv @ d)
    if curv < 0.0:
        scale = float(d @ d)
        if curv < -NEG_CURVATURE_TOL * max(scale, 1.0):
            raise NonConvexError(f"negative curvature {curv:.3e} along direction")
        curv = 0.0
    lam = math.sqrt(curv)
    r = oracle.M_f * float(np.linalg.norm(d))
    beta = H.norm(d)
    return StepQuantities(lam, r, beta)


def step_condition(q: StepQuantities):
    """``beta^2 r <= (e^r - 1) lam^2``, evaluated as ``beta^2 <= gamma(r) lam^2``."""
    return q.beta ** 2 <= gamma_factor(q.r) * q.lam ** 2


def worst_case_decrease(q: StepQuantities, tau):
    """``psi_k(tau) = beta^2 tau - lam^2 omega(r tau) tau^2``."""
    return q.beta ** 2 * tau - q.lam ** 2 * omega(q.r * tau) * tau * tau


def analytic_step(q: StepQuantities) -> StepResult:
    """Analytic step ``alpha = (1/r) log(1 + beta^2 r / lam^2)`` and its guaranteed decrease."""
    if q.beta <= 0.0:
        raise ValueError("beta must be positive; a zero direction means termination")
    if q.lam <= 0.0:
        raise SingularCurvatureError("zero curvature along a nonzero direction")
    ratio = q.beta ** 2 / q.lam ** 2
    holds = step_condition(q)
    if q.r <= R_EPS:
        alpha = min(1.0, ratio)
        decrease = q.beta ** 4 / (2.0 * q.lam ** 2)
    else:
        z = ratio * q.r
        alpha = math.log1p(z) / q.r
        # (beta^2/r)[(1 + lam^2/(r beta^2)) log(1+z) - 1] == lam^2 psi(z) / r^2
        decrease = q.lam ** 2 * psi_decrement(z) / (q.r * q.r)
    return StepResult(alpha, holds, decrease)


def damped_newton_step(r):
    """``log(1 + r) / r`` with value 1 at ``r = 0``."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r <= R_EPS:
        return 1.0
    return math.log1p(r) / r


def bb_estimate(s, y, fallback=1.0):
    """Secant curvature estimate ``||y||^2 / <y, s>``, or ``fallback`` when
    the curvature pair is not positive."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    ys = float(y @ s)
    if ys > 1e-12 * np.linalg.norm(y) * np.linalg.norm(s) and ys > 0.0:
        return float(y @ y) / ys
    return fallback
