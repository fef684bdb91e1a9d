"""Dolan-More performance profiles.

For problem ``p`` and solver ``s`` with cost ``T[p, s]`` the ratio is
``r[p, s] = T[p, s] / min_s T[p, s]`` and the profile is

    rho_s(tau) = |{p : log2 r[p, s] <= tau}| / n_p

Failed runs carry ``inf`` cost and never count.  Problems that every solver
failed are dropped from ``n_p`` and listed in :attr:`ProfileResult.dropped`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ProfileTable:
    """Costs ``times[p, s]``; ``inf`` (or ``nan``) marks a failure."""

    times: np.ndarray
    solver_names: list
    problem_names: list

    def __post_init__(self):
        T = np.array(self.times, dtype=float)
        if T.ndim != 2:
            raise ValueError("times must be a 2-D array")
        if T.size == 0:
            raise ValueError("empty profile table")
        if T.shape != (len(self.problem_names), len(self.solver_names)):
            raise ValueError("times shape does not match problem/solver names")
        T[np.isnan(T)] = np.inf
        if np.any(T <= 0):
            raise ValueError("costs must be positive")
        self.times = T

    @classmethod
    def from_records(cls, records, metric="seconds", floor=1e-9):
        """Assemble a table from :class:`RunRecord` objects.

        Unconverged runs become ``inf``.  Zero costs (e.g. a solver that was
        already at the optimum) are raised to ``floor`` so ratios stay finite.
        """
        problems, solvers = [], []
        for r in records:
            if r.problem not in problems:
                problems.append(r.problem)
            if r.solver not in solvers:
                solvers.append(r.solver)
        T = np.full((len(problems), len(solvers)), np.inf)
        for r in records:
            if r.converged:
                v = float(getattr(r, metric))
                T[problems.index(r.problem), solvers.index(r.solver)] = max(v, floor)
        return cls(T, solvers, problems)


@dataclass
class ProfileResult:
    tau: np.ndarray
    rho: dict
    dropped: list = field(default_factory=list)
    log_ratios: np.ndarray = None

    def to_csv(self) -> str:
        names = list(self.rho)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau"] + names)
        for i, t in enumerate(self.tau):
            w.writerow([repr(float(t))] + [repr(float(self.rho[n][i])) for n in names])
        return buf.getvalue()


def log2_ratios(table: ProfileTable):
    """Return ``(log2 r, kept_rows, dropped_names)``."""
    T = table.times
    best = T.min(axis=1)
    kept = np.isfinite(best)
    dropped = [n for n, k in zip(table.problem_names, kept) if not k]
    with np.errstate(invalid="ignore"):
        R = np.log2(T[kept] / best[kept, None])
    return R, kept, dropped


def default_tau_grid(table: ProfileTable):
    R, _, _ = log2_ratios(table)
    finite = R[np.isfinite(R)]
    return np.unique(np.concatenate([[0.0], finite]))


def performance_profile(table: ProfileTable, tau_grid=None) -> ProfileResult:
    """Evaluate ``rho_s`` on ``tau_grid`` (default: 0 and every observed
    ratio, which captures all jumps of the step functions).

    Raises
    ------
    ValueError
        If the grid is not increasing or every problem was failed by all
        solvers.
    """
    R, kept, dropped = log2_ratios(table)
    n_p = R.shape[0]
    if n_p == 0:
        raise ValueError("no problem was solved by any solver")
    tau = default_tau_grid(table) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be strictly increasing")
    rho = {}
    for j, name in enumerate(table.solver_names):
        col = np.sort(R[:, j])
        # count of ratios <= tau; inf never qualifies
        rho[name] = np.searchsorted(col, tau, side="right") / n_p
    return ProfileResult(tau, rho, dropped, R)


def read_profile_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    tau = np.array([float(r[0]) for r in body])
    rho = {name: np.array([float(r[i + 1]) for r in body]) for i, name in enumerate(header[1:])}
    return ProfileResult(tau, rho)


def terminal_fraction(table: ProfileTable):
    """Fraction of kept problems each solver finished."""
    R, _, _ = log2_ratios(table)
    return {n: float(np.mean(np.isfinite(R[:, j]))) if R.size else math.nan
            for j, n in enumerate(table.solver_names)}
