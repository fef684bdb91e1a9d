"""Nonsmooth terms, variable metrics and scaled proximal operators.

Throughout, the proximal operator of ``g`` in the metric ``H`` is the
H-weighted one::

    prox_{H,g}(w) = argmin_z { g(z) + 1/2 <H(z - w), z - w> }

which is the same as the scaled operator ``P_H^g(u) = (H + dg)^{-1}(u)``
evaluated at ``u = H w``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, cg

from .linalg import power_iteration

_EPS = np.finfo(float).eps


class InnerSolverError(RuntimeError):
    """The scaled-prox inner solver hit its iteration cap."""

    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"scaled prox did not converge in {iterations} iterations "
            f"(residual {residual:.3e})")


# ---------------------------------------------------------------------------
# closed-form pieces


def soft_threshold_diag(u, D, rho):
    """Componentwise ``sign(u) * max(|u| - rho/D, 0)``.

    Solves ``argmin_z rho*||z||_1 + 1/2 sum_i D_i (z_i - u_i)^2``.  Inputs
    with ``|u_i| == rho/D_i`` map to exactly zero.
    """
    u = np.asarray(u, dtype=float)
    shrink = np.maximum(np.abs(u) - np.asarray(rho, dtype=float) / D, 0.0)
    return np.where(shrink > 0.0, np.sign(u) * shrink, 0.0)


def box_clip(u, lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("infeasible box: lo > hi")
    return np.clip(u, lo, hi)


# ---------------------------------------------------------------------------
# nonsmooth terms


class NonsmoothTerm:
    """Proper closed convex ``g`` with a closed-form diagonal-metric prox."""

    dim = None
    separable = True

    def value(self, x):
        raise NotImplementedError

    def prox_diag(self, u, D, weight=1.0):
        """``argmin_z weight*g(z) + 1/2 sum D_i (z_i - u_i)^2``."""
        raise NotImplementedError

    def subgradient_residual(self, x, v):
        """Euclidean distance from ``-v`` to ``dg(x)``."""
        raise NotImplementedError

    def polish(self, H, u, z):
        """Exact minimiser of ``g + 1/2<Hz,z> - <u,z>`` guessed from the
        structure of ``z``, or ``None``.  Optional."""
        return None


class ZeroTerm(NonsmoothTerm):
    def __init__(self, dim=None):
        self.dim = dim

    def value(self, x):
        return 0.0

    def prox_diag(self, u, D, weight=1.0):
        return np.array(u, dtype=float)

    def subgradient_residual(self, x, v):
        return float(np.linalg.norm(v))

    def __repr__(self):
        return "ZeroTerm()"


class L1Norm(NonsmoothTerm):
    """Weighted l1 norm ``sum_i rho_i |x_i|``; ``rho`` may be a scalar."""

    def __init__(self, rho, dim=None):
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < 0):
            raise ValueError("l1 weights must be nonnegative")
        if rho.ndim == 1:
            dim = rho.size if dim is None else dim
            if rho.size != dim:
                raise ValueError("weight vector length does not match dim")
        self.rho = rho
        self.dim = dim

    def value(self, x):
        return float(np.sum(self.rho * np.abs(x)))

    def prox_diag(self, u, D, weight=1.0):
        return soft_threshold_diag(u, D, weight * self.rho)

    def subgradient_residual(self, x, v):
        x = np.asarray(x, dtype=float)
        w = -np.asarray(v, dtype=float)
        rho = np.broadcast_to(self.rho, x.shape)
        on = x != 0.0
        res = np.where(on, w - rho * np.sign(x), np.maximum(np.abs(w) - rho, 0.0))
        return float(np.linalg.norm(res))

    def polish(self, H, u, z):
        support = np.flatnonzero(z)
        rho = np.broadcast_to(self.rho, z.shape)
        sg = np.sign(z[support])
        out = np.zeros_like(z)
        if support.size:
            try:
                out[support] = np.linalg.solve(
                    H[np.ix_(support, support)], u[support] - rho[support] * sg)
            except np.linalg.LinAlgError:
                return None
            if np.any(np.sign(out[support]) != sg):
                return None
        return out

    def __repr__(self):
        return f"L1Norm(rho={self.rho!r})"


class BoxIndicator(NonsmoothTerm):
    """Indicator of ``{x : lo <= x <= hi}``."""

    def __init__(self, lo, hi, dim=None):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(lo > hi):
            raise ValueError("infeasible box: lo > hi")
        self.lo, self.hi = lo, hi
        if dim is None and lo.ndim == 1:
            dim = lo.size
        self.dim = dim

    def value(self, x):
        if np.all(x >= self.lo) and np.all(x <= self.hi):
            return 0.0
        return float("inf")

    def prox_diag(self, u, D, weight=1.0):
        return box_clip(u, self.lo, self.hi)

    def subgradient_residual(self, x, v):
        x = np.asarray(x, dtype=float)
        w = -np.asarray(v, dtype=float)
        lo = np.broadcast_to(self.lo, x.shape)
        hi = np.broadcast_to(self.hi, x.shape)
        at_lo = x <= lo
        at_hi = x >= hi
        res = np.where(at_lo & at_hi, 0.0,
                       np.where(at_lo, np.maximum(w, 0.0),
                                np.where(at_hi, np.maximum(-w, 0.0), w)))
        return float(np.linalg.norm(res))

    def polish(self, H, u, z):
        lo = np.broadcast_to(self.lo, z.shape)
        hi = np.broadcast_to(self.hi, z.shape)
        free = np.flatnonzero((z > lo) & (z < hi))
        out = z.copy()
        if free.size:
            fixed = np.setdiff1d(np.arange(z.size), free)
            rhs = u[free] - H[np.ix_(free, fixed)] @ z[fixed]
            try:
                out[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                return None
            if np.any(out[free] < lo[free]) or np.any(out[free] > hi[free]):
                return None
        return out

    def __repr__(self):
        return "BoxIndicator()"


# ---------------------------------------------------------------------------
# metrics


class Metric:
    """Symmetric positive definite ``H = scale * base``.

    ``kind`` is one of ``"diagonal"``, ``"dense"``, ``"bfgs"`` (a dense
    matrix maintained by BFGS updates) or ``"operator"`` (matrix-free,
    e.g. an exact Hessian available only through products).
    """

    def __init__(self, kind, data, scale=1.0, dim=None):
        if scale <= 0:
            raise ValueError("metric scale must be positive")
        self.kind = kind
        self.scale = float(scale)
        self._chol = None
        self._smax = None
        if kind == "diagonal":
            data = np.asarray(data, dtype=float)
            if np.any(data <= 0):
                raise ValueError("diagonal metric entries must be positive")
            self.dim = data.size
        elif kind in ("dense", "bfgs"):
            data = np.asarray(data, dtype=float)
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise ValueError("dense metric must be square")
            if not np.allclose(data, data.T, rtol=1e-10, atol=1e-12 * np.abs(data).max()):
                raise ValueError("dense metric must be symmetric")
            data = 0.5 * (data + data.T)
            try:
                self._chol = sla.cho_factor(data)
            except np.linalg.LinAlgError as exc:
                raise ValueError("metric is not positive definite") from exc
            self.dim = data.shape[0]
        elif kind == "operator":
            if dim is None:
                raise ValueError("operator metric needs dim")
            self.dim = int(dim)
        else:
            raise ValueError(f"unknown metric kind {kind!r}")
        self.data = data

    # constructors
    @classmethod
    def identity(cls, n):
        return cls("diagonal", np.ones(n))

    @classmethod
    def scalar(cls, L, n):
        return cls("diagonal", np.ones(n), scale=L)

    @classmethod
    def diagonal(cls, D):
        return cls("diagonal", D)

    @classmethod
    def dense(cls, H):
        return cls("dense", H)

    @classmethod
    def bfgs(cls, B):
        return cls("bfgs", B)

    @classmethod
    def operator(cls, matvec, n):
        return cls("operator", matvec, dim=n)

    @property
    def is_diagonal(self):
        return self.kind == "diagonal"

    @property
    def diag(self):
        if not self.is_diagonal:
            raise TypeError("metric is not diagonal")
        return self.scale * self.data

    def scaled(self, c):
        m = Metric.__new__(Metric)
        m.__dict__.update(self.__dict__)
        m.scale = self.scale * c
        m._smax = None
        return m

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "diagonal":
            return self.scale * self.data * v
        if self.kind == "operator":
            return self.scale * np.asarray(self.data(v), dtype=float)
        return self.scale * (self.data @ v)

    def solve(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "diagonal":
            return v / (self.scale * self.data)
        if self.kind == "operator":
            op = LinearOperator((self.dim, self.dim), matvec=self.matvec, dtype=float)
            sol, info = cg(op, v, rtol=1e-14, atol=0.0, maxiter=10 * self.dim + 100)
            if info > 0:
                raise InnerSolverError(float(np.linalg.norm(self.matvec(sol) - v)), info)
            return sol
        return sla.cho_solve(self._chol, v) / self.scale

    def quad(self, v):
        return float(v @ self.matvec(v))

    def norm(self, v):
        return float(np.sqrt(max(self.quad(v), 0.0)))

    def dual_norm(self, v):
        return float(np.sqrt(max(float(v @ self.solve(v)), 0.0)))

    def as_dense(self):
        if self.kind == "diagonal":
            return np.diag(self.scale * self.data)
        if self.kind == "operator":
            return np.column_stack([self.matvec(e) for e in np.eye(self.dim)])
        return self.scale * self.data

    def sigma_max_bound(self):
        """Upper estimate of the largest eigenvalue (power iteration)."""
        if self._smax is None:
            if self.kind == "diagonal":
                self._smax = float(np.max(self.scale * self.data))
            else:
                theta, _, resid = power_iteration(self.matvec, self.dim, iters=300,
                                                  seed=12345, tol=1e-10)
                self._smax = 1.02 * (theta + resid)
        return self._smax

    def __repr__(self):
        return f"Metric(kind={self.kind!r}, dim={self.dim}, scale={self.scale:g})"


# ---------------------------------------------------------------------------
# scaled prox and the composite quadratic subproblem


def scaled_prox(g, H, u, tol=1e-10, z0=None, max_iter=None, return_info=False):
    """Solve ``argmin_z g(z) + 1/2 <Hz, z> - <u, z>``.

    Closed form when ``H`` is diagonal and ``g`` separable, a linear solve
    when ``g`` is zero, and accelerated proximal gradient (with adaptive
    restart and an active-set polish) otherwise.  The returned point ``z``
    satisfies ``g.subgradient_residual(z, Hz - u) <= tol`` up to rounding.

    With ``return_info`` the result is ``(z, info)`` where ``info`` holds
    ``prox_calls``, ``iterations`` and ``residual``.
    """
    u = np.asarray(u, dtype=float)
    info = {"prox_calls": 1, "iterations": 0, "residual": 0.0}
    if isinstance(g, ZeroTerm):
        z = H.solve(u)
    elif H.is_diagonal and g.separable:
        D = H.diag
        z = g.prox_diag(u / D, D)
    else:
        z, info = _apg(g, H, u, tol, z0, max_iter)
    return (z, info) if return_info else z


def _apg(g, H, u, tol, z0, max_iter):
    n = u.size
    cap = max_iter if max_iter is not None else 10 * n + 500
    Lh = H.sigma_max_bound()
    dense = H.as_dense() if H.kind != "operator" else None
    z = np.zeros(n) if z0 is None else np.array(z0, dtype=float)
    y = z.copy()
    t = 1.0
    calls = 0
    unorm = np.linalg.norm(u)
    gnorm = np.inf
    for it in range(1, cap + 1):
        gy = H.matvec(y) - u
        z_new = g.prox_diag(y - gy / Lh, Lh)
        calls += 1
        G = Lh * (y - z_new)
        gnorm = float(np.linalg.norm(G))
        # rounding floor of H y - u; below it the mapping norm is noise
        floor = 64 * _EPS * (unorm + Lh * np.linalg.norm(z_new))
        stop = max(tol, floor)
        if gnorm <= stop:
            if dense is not None:
                cand = g.polish(dense, u, z_new)
                if cand is not None:
                    res = g.subgradient_residual(cand, dense @ cand - u)
                    if res < gnorm:
                        return cand, {"prox_calls": calls, "iterations": it, "residual": res}
            return z_new, {"prox_calls": calls, "iterations": it, "residual": gnorm}
        if dense is not None and it % 10 == 0:
            cand = g.polish(dense, u, z_new)
            if cand is not None:
                res = g.subgradient_residual(cand, dense @ cand - u)
                if res <= stop:
                    return cand, {"prox_calls": calls, "iterations": it, "residual": res}
        if np.dot(y - z_new, z_new - z) > 0.0:
            t = 1.0
            y = z_new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = z_new + ((t - 1.0) / t_new) * (z_new - z)
            t = t_new
        z = z_new
    raise InnerSolverError(gnorm, cap)


def solve_subproblem(p, x, H, tol=1e-10, z0=None, grad=None, return_info=False):
    """Minimise the composite quadratic model of ``F`` around ``x``.

    Returns ``(s, d)`` with ``d = s - x``, where ``s`` minimises
    ``<grad f(x), z - x> + 1/2 <H(z - x), z - x> + g(z)``.
    """
    x = np.asarray(x, dtype=float)
    gx = p.oracle.grad(x) if grad is None else grad
    u = H.matvec(x) - gx
    s, info = scaled_prox(p.nonsmooth, H, u, tol, z0=x if z0 is None else z0,
                          return_info=True)
    if return_info:
        return s, s - x, info
    return s, s - x


def subproblem_residual(p, x, H, s, grad=None):
    """Distance of ``-(grad f(x) + H(s - x))`` from ``dg(s)``."""
    gx = p.oracle.grad(x) if grad is None else grad
    return p.nonsmooth.subgradient_residual(s, gx + H.matvec(s - x))
