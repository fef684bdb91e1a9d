"""Matplotlib renderings of profiles and convergence traces.

Figures go straight to files through the object-oriented API (no pyplot
state), so rendering is safe from worker threads and needs no display.
SVG output is made reproducible by fixing the hash salt and dropping the
date stamp.
"""

from __future__ import annotations

import math
import os

import matplotlib
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
import numpy as np

GOLDEN = (math.sqrt(5) - 1.0) / 2.0
STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "svg.hashsalt": "sclopt",
    "svg.fonttype": "none",
}


def _figure(width=5.0):
    fig = Figure(figsize=(width, width * GOLDEN))
    FigureCanvasAgg(fig)
    return fig


def _save(fig, path):
    fmt = os.path.splitext(os.fspath(path))[1].lstrip(".") or "svg"
    meta = {"Date": None} if fmt == "svg" else None
    fig.savefig(path, format=fmt, metadata=meta, bbox_inches="tight")


def profile_figure(result, path, title=None, xlabel=r"$\tau$ ($\log_2$ ratio)"):
    """Step plot of each solver's ``rho_s(tau)``."""
    with matplotlib.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        tau = np.asarray(result.tau, dtype=float)
        # extend past the last jump so the terminal level is visible
        right = tau[-1] + max(0.25, 0.1 * (tau[-1] - tau[0]))
        for name, rho in result.rho.items():
            ax.step(np.append(tau, right), np.append(rho, rho[-1]), where="post", label=name)
        ax.set_xlim(tau[0], right)
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(r"$\rho_s(\tau)$")
        if title:
            ax.set_title(title)
        ax.grid(alpha=0.3)
        ax.legend(loc="lower right")
        _save(fig, path)
    return path


def convergence_figure(trace, path, F_star=None, title=None):
    """Semilog plot of the per-iteration residual (and the optimality gap
    when ``F_star`` is known) for the accepted iterations of ``trace``."""
    recs = trace.accepted() or trace.records
    k = np.array([r.k for r in recs])
    with matplotlib.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        res = np.array([r.residual for r in recs])
        ax.semilogy(k, np.maximum(res, 1e-300), marker=".", label=r"$\|d_k\|$")
        if F_star is not None:
            gap = np.array([r.F_value for r in recs]) - F_star
            ok = gap > 0
            ax.semilogy(k[ok], gap[ok], marker=".", label=r"$F(x_k) - F^\star$")
        ax.set_xlabel("iteration")
        ax.set_title(title or trace.solver)
        ax.grid(alpha=0.3, which="both")
        ax.legend()
        _save(fig, path)
    return path
