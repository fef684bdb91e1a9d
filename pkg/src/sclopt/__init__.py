"""Composite convex optimisation for self-concordant-like smooth terms.

Solvers for ``min f(x) + g(x)`` where ``f`` satisfies
``|phi'''(t)| <= M_f phi''(t) ||u||`` along every line ``x + t u`` and ``g``
has a cheap proximal operator.  Step sizes are analytic; no line search is
used.
"""

from .core import (NonFiniteError, ProblemInstance, RunTrace, SmoothOracle, TraceRecord,
                   fixed_point_residual, objective_value)
from .oracles import (ExpSumData, LogisticData, MultinomialData, expsum_oracle,
                      logistic_oracle, logistic_problem, multinomial_oracle,
                      multinomial_problem, quadratic_oracle)
from .prox import BoxIndicator, L1Norm, Metric, ZeroTerm, scaled_prox, solve_subproblem
from .solvers import (SOLVERS, SolverError, SolverOptions, newton_iteration_caps,
                      prox_gradient_solve, prox_newton_solve, prox_quasi_newton_solve,
                      rate_diagnostics)
from .steps import analytic_step, damped_newton_step, step_quantities
from .verify import SclCheckReport, check_definition, check_theorem5_bounds, estimate_Mf

__version__ = "0.1.0"

__all__ = [
    "NonFiniteError", "ProblemInstance", "RunTrace", "SmoothOracle", "TraceRecord",
    "fixed_point_residual", "objective_value", "ExpSumData", "LogisticData",
    "MultinomialData", "expsum_oracle", "logistic_oracle", "logistic_problem",
    "multinomial_oracle", "multinomial_problem", "quadratic_oracle", "BoxIndicator",
    "L1Norm", "Metric", "ZeroTerm", "scaled_prox", "solve_subproblem", "SOLVERS",
    "SolverError", "SolverOptions", "newton_iteration_caps", "prox_gradient_solve",
    "prox_newton_solve", "prox_quasi_newton_solve", "rate_diagnostics", "analytic_step",
    "damped_newton_step", "step_quantities", "SclCheckReport", "check_definition",
    "check_theorem5_bounds", "estimate_Mf",
]
