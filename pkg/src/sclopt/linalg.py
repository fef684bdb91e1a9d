"""Extreme eigenvalue estimation for symmetric positive semidefinite operators."""

from __future__ import annotations

import numpy as np


class EigenBreakdown(ArithmeticError):
    pass


def _as_operator(op):
    if callable(op):
        return op
    A = op
    return lambda v: A @ v


def _unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def power_iteration(op, n, iters=200, seed=0, tol=1e-12, shift=None):
    """Dominant eigenpair of ``op`` (or of ``shift*I - op`` when ``shift`` is given).

    Returns ``(theta, v, resid)`` where ``theta`` is the Rayleigh quotient of
    the final unit vector ``v`` and ``resid = ||A v - theta v||``.  Restarts
    from a fresh random vector on breakdown, at most five times.
    """
    apply = _as_operator(op)
    if shift is not None:
        base = apply
        apply = lambda v: shift * v - base(v)  # noqa: E731
    rng = np.random.default_rng(seed)
    for _ in range(6):
        v = _unit(rng, n)
        theta = 0.0
        broke = False
        for _ in range(iters):
            w = apply(v)
            nw = np.linalg.norm(w)
            if not np.isfinite(nw):
                raise EigenBreakdown("non-finite operator output")
            if nw == 0.0:
                broke = True
                break
            theta_new = float(v @ w)
            v = w / nw
            if abs(theta_new - theta) <= tol * max(abs(theta_new), 1e-300):
                theta = theta_new
                break
            theta = theta_new
        if broke:
            # v is in the null space: the dominant eigenvalue may still be 0
            # only if every restart lands there as well
            continue
        w = apply(v)
        theta = float(v @ w)
        return theta, v, float(np.linalg.norm(w - theta * v))
    return 0.0, v, 0.0


def extreme_eigs(op, n, iters=200, seed=0):
    """Return ``(sigma_min, sigma_max)`` of a symmetric PSD operator.

    ``sigma_max`` comes from power iteration on ``op``; ``sigma_min`` from
    power iteration on the shifted operator ``sigma_max*I - op``.
    """
    smax, _, _ = power_iteration(op, n, iters=iters, seed=seed)
    if smax <= 0.0:
        return 0.0, 0.0
    # shift slightly above smax so the shifted operator stays PSD
    shift = smax * (1.0 + 1e-12)
    gap, _, _ = power_iteration(op, n, iters=iters, seed=seed + 1, shift=shift)
    smin = max(shift - gap, 0.0)
    return min(smin, smax), smax


def lanczos_extremes(op, n, k=20, seed=0):
    """Smallest and largest Ritz values after ``k`` Lanczos steps.

    Uses full reorthogonalisation; ``k`` is capped at ``n``.
    """
    apply = _as_operator(op)
    rng = np.random.default_rng(seed)
    k = max(1, min(k, n))
    Q = np.zeros((n, k))
    alpha = np.zeros(k)
    beta = np.zeros(k)
    q = _unit(rng, n)
    m = k
    for j in range(k):
        Q[:, j] = q
        w = apply(q)
        alpha[j] = q @ w
        w = w - Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        w = w - Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        b = np.linalg.norm(w)
        if j + 1 < k:
            if b <= 1e-12 * max(abs(alpha[j]), 1.0):
                m = j + 1
                break
            beta[j] = b
            q = w / b
    T = np.diag(alpha[:m]) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
    ritz = np.linalg.eigvalsh(T)
    return float(ritz[0]), float(ritz[-1])
