"""Independent reference computations used by several test modules."""

import numpy as np
from scipy.optimize import minimize_scalar

from sclopt.oracles import (ExpSumData, LogisticData, MultinomialData, expsum_oracle,
                            logistic_oracle, multinomial_oracle, quadratic_oracle)


def fd_grad(f, x, h=None):
    """Central-difference gradient, coordinate by coordinate."""
    x = np.asarray(x, dtype=float)
    h = 1e-5 * (1.0 + np.linalg.norm(x)) if h is None else h
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hess_vec(grad, x, v, h=None):
    """Fourth-order central difference of the gradient along ``v``."""
    h = 1e-3 * (1.0 + np.linalg.norm(x)) / max(np.linalg.norm(v), 1e-300) if h is None else h
    return (-grad(x + 2 * h * v) + 8 * grad(x + h * v)
            - 8 * grad(x - h * v) + grad(x - 2 * h * v)) / (12 * h)


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)


def golden_min_1d(fun, lo, hi):
    """Bounded scalar minimisation (scipy's Brent/golden) as a 1-D oracle."""
    res = minimize_scalar(fun, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 500})
    return res.x


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = np.exp(rng.uniform(0, np.log(cond), n))
    return (Q * ev) @ Q.T


def shipped_oracles(seed=0):
    """One small instance of every shipped oracle, keyed by name."""
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((20, 5))
    y = np.where(rng.uniform(size=20) < 0.5, 1.0, -1.0)
    Wm = rng.standard_normal((10, 4))
    cls = rng.integers(0, 4, 10)
    A = rng.standard_normal((6, 4)) / 2
    b = rng.standard_normal(6) / 2
    c = rng.standard_normal(4) / 2
    return {
        "logistic": logistic_oracle(LogisticData(W, y, True)),
        "multinomial": multinomial_oracle(MultinomialData.from_classes(Wm, cls, 4)),
        "expsum": expsum_oracle(ExpSumData(A, b, c)),
        "quadratic": quadratic_oracle(random_spd(rng, 5), rng.standard_normal(5)),
    }
