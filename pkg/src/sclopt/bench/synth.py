"""Seeded synthetic problem generators for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from ..core import ProblemInstance
from ..oracles import (ExpSumData, LogisticData, MultinomialData, expsum_oracle,
                       logistic_problem, multinomial_problem)
from ..prox import L1Norm


def synth_gp_instance(n, m, seed=0) -> ProblemInstance:
    """Exp-sum geometric program ``sum_i exp(<a_i,x> + b_i) + <c,x> + ||x||_1``.

    ``a_i``, ``b_i`` and ``c`` are standard normal draws scaled by
    ``1/sqrt(n)``.  The instance's ``M_f`` is ``max_i ||a_i||``.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = np.random.default_rng(seed)
    s = 1.0 / np.sqrt(n)
    A = rng.standard_normal((m, n)) * s
    b = rng.standard_normal(m) * s
    c = rng.standard_normal(n) * s
    oracle = expsum_oracle(ExpSumData(A, b, c))
    return ProblemInstance(oracle, L1Norm(1.0, n), name=f"gp-{n}x{m}-s{seed}")


def logistic_data(n_samples, n_features, seed=0, density=1.0, nnz_truth=5,
                  include_bias=True, noise=1.0, feature_scale=1.0) -> LogisticData:
    """Features ``N(0, feature_scale^2)`` (optionally sparsified), labels from a logistic
    model with a sparse ground truth of ``nnz_truth`` entries."""
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((n_samples, n_features)) * (feature_scale / np.sqrt(density))
    if density < 1.0:
        W *= rng.uniform(size=W.shape) < density
    truth = np.zeros(n_features)
    k = min(nnz_truth, n_features)
    truth[rng.choice(n_features, k, replace=False)] = rng.standard_normal(k)
    prob = 1.0 / (1.0 + np.exp(-(W @ truth) / noise))
    y = np.where(rng.uniform(size=n_samples) < prob, 1.0, -1.0)
    return LogisticData(W, y, include_bias)


def desk_logistic(n_samples=200, n_features=50, rho=0.1, seed=0, **kw) -> ProblemInstance:
    data = logistic_data(n_samples, n_features, seed, **kw)
    return logistic_problem(data, rho, name=f"logistic-{n_samples}x{n_features}-s{seed}")


def multinomial_data(n_samples, n_features, n_classes, seed=0) -> MultinomialData:
    """Gaussian-mixture features; ``n_classes`` includes the reference class."""
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_classes, n_features))
    cls = rng.integers(0, n_classes, n_samples)
    W = (centers[cls] + rng.standard_normal((n_samples, n_features))) / np.sqrt(n_features)
    # the last class is the implicit reference class (all-zero label row)
    return MultinomialData.from_classes(W, cls, n_classes)


def desk_multinomial(n_samples=100, n_features=10, n_classes=3, rho=0.01, seed=0,
                     sound_constant=False) -> ProblemInstance:
    data = multinomial_data(n_samples, n_features, n_classes, seed)
    return multinomial_problem(data, rho, name=f"multinomial-{n_samples}x{n_features}"
                               f"x{n_classes}-s{seed}", sound_constant=sound_constant)


def parse_synthetic(spec: str, seed=0, rho=None, sound_constant=False):
    """Build an instance from ``KIND[:AxB[xC]]``.

    Kinds: ``logistic:NxP``, ``multinomial:NxPxK``, ``gp:NxM``.
    """
    kind, _, dims = spec.partition(":")
    try:
        sizes = [int(t) for t in dims.split("x")] if dims else []
    except ValueError:
        raise ValueError(f"bad synthetic size {dims!r}") from None
    if any(s < 1 for s in sizes):
        raise ValueError("synthetic sizes must be positive")
    if kind == "logistic":
        N, p = (sizes + [200, 50][len(sizes):])[:2]
        return desk_logistic(N, p, 0.1 if rho is None else rho, seed)
    if kind == "multinomial":
        N, p, K = (sizes + [100, 10, 3][len(sizes):])[:3]
        if K < 2:
            raise ValueError("multinomial needs at least 2 classes")
        return desk_multinomial(N, p, K, 0.01 if rho is None else rho, seed,
                                sound_constant=sound_constant)
    if kind == "gp":
        n, m = (sizes + [50, 30][len(sizes):])[:2]
        p = synth_gp_instance(n, m, seed)
        if rho is not None:
            p = ProblemInstance(p.oracle, L1Norm(rho, n), p.name)
        return p
    raise ValueError(f"unknown synthetic kind {kind!r}")
