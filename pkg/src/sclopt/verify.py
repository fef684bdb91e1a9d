"""Numerical certification of the self-concordant-like inequality.

Two families of checks are provided:

* :func:`check_definition` tests ``|phi'''(0)| <= M_f phi''(0) ||u||`` for
  ``phi(t) = f(x + t u)``.
* :func:`check_theorem5_bounds` tests the consequences of that inequality
  relating the local geometry at two points ``x`` and ``y`` (local norms,
  Hessian sandwich, gradient monotonicity and function value).

Reports are merged with ``+`` which is associative, so sample loops can be
split across workers freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .core import NonFiniteError, SmoothOracle
from .steps import omega, gamma_factor

FD_REL_TOL = 1e-4
PAIR_SLACK = 1e-8
_EPS = np.finfo(float).eps


class InsufficientCurvatureError(ValueError):
    """Every sample had ``phi''`` below the curvature guard."""


@dataclass(frozen=True)
class SclCheckReport:
    """Summary of a batch of inequality checks.

    Attributes
    ----------
    samples : int
        Number of evaluated (non-skipped) samples.
    violations : int
        Samples whose slack fell below ``-tolerance`` for that sample.
    worst_margin : float
        Most negative slack seen (``+inf`` for an empty report).
    tolerance : float
        Largest per-sample tolerance used.
    skipped : int
        Samples dropped because a stencil value was not finite.
    """

    samples: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    tolerance: float = 0.0
    skipped: int = 0

    def __post_init__(self):
        if self.violations > self.samples:
            raise ValueError("violations cannot exceed samples")

    def __add__(self, other: "SclCheckReport") -> "SclCheckReport":
        return SclCheckReport(
            self.samples + other.samples,
            self.violations + other.violations,
            min(self.worst_margin, other.worst_margin),
            max(self.tolerance, other.tolerance),
            self.skipped + other.skipped,
        )

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def as_dict(self):
        d = asdict(self)
        if math.isinf(d["worst_margin"]):
            d["worst_margin"] = None
        return d

    @classmethod
    def single(cls, margin, tol):
        return cls(1, int(margin < -tol), float(margin), float(tol), 0)

    @classmethod
    def skip(cls):
        return cls(skipped=1)


def _combine(reports):
    out = SclCheckReport()
    for rep in reports:
        out = out + rep
    return out


def aux_functions(tau):
    """Return ``(omega, omega_star, gamma, gamma_star)`` at ``tau >= 0``.

    ``omega(t) = (e^t - t - 1)/t^2``, ``omega_star(t) = omega(-t)``,
    ``gamma(t) = (e^t - 1)/t`` and ``gamma_star(t) = gamma(-t)``; all are
    evaluated stably near zero.
    """
    tau = float(tau)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return omega(tau), omega(-tau), gamma_factor(tau), gamma_factor(-tau)


def fd_step(x):
    return _EPS ** 0.2 * (1.0 + float(np.linalg.norm(x)))


def directional_derivatives(oracle: SmoothOracle, x, u, h=None):
    """Return ``(phi2, phi3)`` for ``phi(t) = f(x + t u)``.

    ``phi2`` comes straight from the Hessian-vector product and ``phi3`` from
    a fourth-order central difference of ``t -> <hess f(x + t u) u, u>``.
    Raises :class:`NonFiniteError` if any stencil value is not finite.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if h is None:
        h = fd_step(x)

    def q(t):
        val = float(oracle.hess_vec(x + t * u, u) @ u)
        if not math.isfinite(val):
            raise NonFiniteError("hessian form", detail=f"t={t:g}")
        return val

    phi2 = q(0.0)
    phi3 = (-q(2 * h) + 8 * q(h) - 8 * q(-h) + q(-2 * h)) / (12 * h)
    return phi2, phi3


def check_definition(oracle: SmoothOracle, x, u, M_f=None) -> SclCheckReport:
    """Check the defining inequality at one ``(x, u)``.

    The direction is normalised first; both sides are homogeneous of degree
    three in ``u`` so nothing is lost.  The sample is a violation when
    ``|phi'''| > M_f phi'' + tol`` with ``tol = 1e-4 (1 + rhs)``.
    """
    u = np.asarray(u, dtype=float)
    nu = float(np.linalg.norm(u))
    if nu == 0.0:
        raise ValueError("direction u must be nonzero")
    M = oracle.M_f if M_f is None else M_f
    try:
        phi2, phi3 = directional_derivatives(oracle, x, u / nu)
    except (NonFiniteError, FloatingPointError, OverflowError):
        return SclCheckReport.skip()
    rhs = M * phi2
    return SclCheckReport.single(rhs - abs(phi3), FD_REL_TOL * (1.0 + abs(rhs)))


def _sandwich(lo, mid, hi, slack):
    """Slack of ``lo <= mid <= hi`` and its tolerance."""
    scale = max(abs(lo), abs(mid), abs(hi))
    return min(mid - lo, hi - mid), slack * (1.0 + scale)


def check_theorem5_bounds(oracle: SmoothOracle, x, y, n_dirs=4, seed=0,
                          slack=PAIR_SLACK, M_f=None) -> SclCheckReport:
    """Check the two-point bounds implied by the SCL inequality.

    With ``d = y - x``, ``r = M_f ||d||`` and ``lam = ||d||_x``:

    a) ``e^{-r/2} ||d||_x <= ||d||_y <= e^{r/2} ||d||_x``
    b) ``e^{-r} <H(x)v,v> <= <H(y)v,v> <= e^{r} <H(x)v,v>`` for ``n_dirs``
       random ``v`` plus ``v = d``
    c) ``gamma_star(r) lam^2 <= <grad f(y) - grad f(x), d> <= gamma(r) lam^2``
    d) ``omega_star(r) lam^2 <= f(y) - f(x) - <grad f(x), d> <= omega(r) lam^2``

    Every inequality contributes one sample to the returned report.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    M = oracle.M_f if M_f is None else M_f
    d = y - x
    r = M * float(np.linalg.norm(d))
    om, om_s, ga, ga_s = aux_functions(r)
    rng = np.random.default_rng(seed)
    reports = []
    try:
        with np.errstate(over="raise", invalid="raise"):
            Hx = oracle.hess_operator(x)
            Hy = oracle.hess_operator(y)
            lam2 = max(float(Hx(d) @ d), 0.0)
            lam_y2 = max(float(Hy(d) @ d), 0.0)
            fx, gx = oracle.value_grad(x)
            fy, gy = oracle.value_grad(y)
    except (NonFiniteError, FloatingPointError, OverflowError):
        return SclCheckReport.skip()
    if not all(map(math.isfinite, (lam2, lam_y2, fx, fy))):
        return SclCheckReport.skip()

    lam, lam_y = math.sqrt(lam2), math.sqrt(lam_y2)
    e_half = math.exp(r / 2)
    reports.append(SclCheckReport.single(*_sandwich(lam / e_half, lam_y, lam * e_half, slack)))

    dirs = [d] if r > 0 else []
    dirs += [rng.standard_normal(x.size) for _ in range(n_dirs)]
    er = math.exp(r)
    for v in dirs:
        qx = float(Hx(v) @ v)
        qy = float(Hy(v) @ v)
        reports.append(SclCheckReport.single(*_sandwich(qx / er, qy, qx * er, slack)))

    mono = float((gy - gx) @ d)
    reports.append(SclCheckReport.single(*_sandwich(ga_s * lam2, mono, ga * lam2, slack)))
    gap = fy - fx - float(gx @ d)
    # f(y) - f(x) cancels catastrophically; include |f| in the tolerance scale
    margin, tol = _sandwich(om_s * lam2, gap, om * lam2, slack)
    tol = max(tol, 8 * _EPS * (abs(fx) + abs(fy)))
    reports.append(SclCheckReport.single(margin, tol))
    return _combine(reports)


def _ball_point(rng, center, radius):
    n = center.size
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    return center + radius * rng.uniform() ** (1.0 / n) * v


def _sphere(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def estimate_Mf(oracle: SmoothOracle, sample_count=200, radius=2.0, anchor=None,
                seed=0, curvature_floor=1e-12):
    """Empirical lower bound on the SCL constant.

    Returns ``max |phi'''| / (phi'' ||u||)`` over samples with ``x`` uniform in
    a ball around ``anchor`` and ``u`` uniform on the unit sphere.  Samples with
    ``phi'' <= curvature_floor`` are ignored.

    Raises
    ------
    InsufficientCurvatureError
        If no sample passes the curvature guard.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    center = np.zeros(oracle.dim) if anchor is None else np.asarray(anchor, float)
    best = None
    for _ in range(sample_count):
        x = _ball_point(rng, center, radius)
        u = _sphere(rng, oracle.dim)
        try:
            phi2, phi3 = directional_derivatives(oracle, x, u)
        except (NonFiniteError, FloatingPointError, OverflowError):
            continue
        if phi2 <= curvature_floor:
            continue
        ratio = abs(phi3) / phi2
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise InsufficientCurvatureError("all samples had negligible curvature")
    return float(best)


@dataclass(frozen=True)
class SclSuiteResult:
    definition: SclCheckReport
    pair_bounds: SclCheckReport

    @property
    def ok(self):
        return self.definition.ok and self.pair_bounds.ok

    def as_dict(self):
        return {"definition": self.definition.as_dict(),
                "pair_bounds": self.pair_bounds.as_dict()}


def verify_oracle(oracle: SmoothOracle, samples=500, radius=2.0, pair_radius=1.0,
                  anchor=None, seed=0, M_f=None) -> SclSuiteResult:
    """Run both checks on ``samples`` random points each.

    Definition samples draw ``x`` uniformly in the ball of ``radius`` around
    ``anchor`` (default 0) and ``u`` on the sphere.  Pair samples draw ``x`` the
    same way and ``y = x + t v`` with ``v`` on the sphere, ``t ~ U(0, pair_radius)``.
    """
    rng = np.random.default_rng(seed)
    n = oracle.dim
    center = np.zeros(n) if anchor is None else np.asarray(anchor, float)
    defs = []
    pairs = []
    for _ in range(samples):
        x = _ball_point(rng, center, radius)
        defs.append(check_definition(oracle, x, _sphere(rng, n), M_f=M_f))
    for i in range(samples):
        x = _ball_point(rng, center, radius)
        y = x + rng.uniform(0, pair_radius) * _sphere(rng, n)
        pairs.append(check_theorem5_bounds(oracle, x, y, n_dirs=2,
                                           seed=seed + i + 1, M_f=M_f))
    return SclSuiteResult(_combine(defs), _combine(pairs))


def level_set_radius_bound(p, x, sigma_min=None, iters=200, seed=0):
    """Radius of a ball around ``x`` containing ``{y : F(y) <= F(x)}``.

    Uses ``F(y) - F(x) >= -G ||d|| + omega_star(M_f ||d||) sigma_min ||d||^2``
    with ``G = dist(-grad f(x), dg(x))`` and ``sigma_min`` the smallest Hessian
    eigenvalue at ``x``.  The level set is certified bounded when
    ``c = M_f G / sigma_min < 1``; otherwise ``inf`` is returned.
    """
    from scipy.optimize import brentq
    from .linalg import extreme_eigs

    x = np.asarray(x, dtype=float)
    oracle = p.oracle
    if sigma_min is None:
        sigma_min, _ = extreme_eigs(oracle.hess_operator(x), oracle.dim, iters, seed)
    G = p.nonsmooth.subgradient_residual(x, oracle.grad(x))
    if G == 0.0:
        return 0.0
    if sigma_min <= 0.0:
        return math.inf
    M = oracle.M_f
    if M == 0.0:
        return 2.0 * G / sigma_min
    c = M * G / sigma_min
    if c >= 1.0:
        return math.inf
    # omega_star(r) r increases from 0 to 1; find where it reaches c
    hi = 1.0
    while omega(-hi) * hi <= c:
        hi *= 2.0
    r = brentq(lambda t: omega(-t) * t - c, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return r / M
