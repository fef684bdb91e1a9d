"""Self-concordant-like smooth oracles.

* binary logistic loss (optionally with an unpenalised bias coordinate),
* multinomial logistic loss with an implicit reference class,
* exponential-sum objective of geometric-programming type,
* a quadratic reference oracle (``M_f = 0``).

Data matrices may be scipy sparse; iterates are always dense vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, log_expit

from .core import NonFiniteError, ProblemInstance, SmoothOracle, check_finite
from .prox import L1Norm

DENSE_HESSIAN_MAX_DIM = 2000


def _rows_norm(W):
    if sp.issparse(W):
        return np.sqrt(np.asarray(W.multiply(W).sum(axis=1)).ravel())
    return np.linalg.norm(W, axis=1)


def _as_matrix(W):
    if sp.issparse(W):
        return sp.csr_matrix(W, dtype=float)
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    return W


def _check_vec(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected vector of length {n}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# data containers


@dataclass(frozen=True)
class LogisticData:
    samples: object  # (N, p) array or sparse matrix
    labels: np.ndarray
    include_bias: bool = False

    def __post_init__(self):
        W = _as_matrix(self.samples)
        y = np.asarray(self.labels, dtype=float).ravel()
        if W.shape[0] < 1:
            raise ValueError("need at least one sample")
        if y.size != W.shape[0]:
            raise ValueError("labels and samples disagree in length")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("logistic labels must be +1 or -1")
        object.__setattr__(self, "samples", W)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def n_features(self):
        return self.samples.shape[1]


@dataclass(frozen=True)
class MultinomialData:
    """``labels`` is an (N, m) 0/1 array; an all-zero row is the reference class."""

    samples: object
    labels: np.ndarray

    def __post_init__(self):
        W = _as_matrix(self.samples)
        Y = np.asarray(self.labels, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if W.shape[0] < 1 or Y.shape[0] != W.shape[0]:
            raise ValueError("labels and samples disagree in length")
        if not np.all(np.isin(Y, (0.0, 1.0))) or np.any(Y.sum(axis=1) > 1):
            raise ValueError("multinomial labels must be one-hot or all-zero rows")
        object.__setattr__(self, "samples", W)
        object.__setattr__(self, "labels", Y)

    @classmethod
    def from_classes(cls, samples, classes, n_classes=None):
        """Build from integer class ids ``0..m``; the largest id is the reference."""
        classes = np.asarray(classes, dtype=int)
        total = int(classes.max()) + 1 if n_classes is None else n_classes
        Y = np.zeros((classes.size, total - 1))
        mask = classes < total - 1
        Y[np.flatnonzero(mask), classes[mask]] = 1.0
        return cls(samples, Y)

    @property
    def n_classes(self):
        return self.labels.shape[1]


@dataclass(frozen=True)
class ExpSumData:
    exponents: np.ndarray  # (m, n), rows a_i
    offsets: np.ndarray  # (m,)
    linear: np.ndarray  # (n,)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.exponents, dtype=float))
        b = np.asarray(self.offsets, dtype=float).ravel()
        c = np.asarray(self.linear, dtype=float).ravel()
        if A.shape[0] < 1:
            raise ValueError("need at least one exponential term")
        if b.size != A.shape[0] or c.size != A.shape[1]:
            raise ValueError("inconsistent exp-sum data shapes")
        object.__setattr__(self, "exponents", A)
        object.__setattr__(self, "offsets", b)
        object.__setattr__(self, "linear", c)


# ---------------------------------------------------------------------------
# oracles


class LogisticOracle(SmoothOracle):
    """``f(x) = N^-1 sum_j log(1 + exp(-y_j (<w_j, x> + mu)))``.

    With a bias the last coordinate of ``x`` is ``mu``.
    """

    def __init__(self, data: LogisticData):
        self.data = data
        W = data.samples
        N = W.shape[0]
        if data.include_bias:
            ones = np.ones((N, 1))
            W = sp.hstack([W, ones], format="csr") if sp.issparse(W) else np.hstack([W, ones])
        self._A = W
        self._y = data.labels
        self._N = N
        self.dim = W.shape[1]
        self.M_f = float(_rows_norm(W).max())
        self.has_dense_hessian = self.dim <= DENSE_HESSIAN_MAX_DIM

    def _margins(self, x):
        x = _check_vec(x, self.dim)
        return self._y * (self._A @ x)

    def value(self, x):
        z = self._margins(x)
        return float(check_finite(-np.mean(log_expit(z)), "logistic value"))

    def grad(self, x):
        z = self._margins(x)
        coef = -self._y * expit(-z) / self._N
        return check_finite(np.asarray(self._A.T @ coef).ravel(), "logistic grad")

    def value_grad(self, x):
        z = self._margins(x)
        val = -np.mean(log_expit(z))
        coef = -self._y * expit(-z) / self._N
        return float(check_finite(val, "logistic value")), np.asarray(self._A.T @ coef).ravel()

    def _weights(self, x):
        z = self._margins(x)
        return expit(z) * expit(-z) / self._N

    def hess_vec(self, x, v):
        v = _check_vec(v, self.dim)
        w = self._weights(x)
        return np.asarray(self._A.T @ (w * (self._A @ v))).ravel()

    def hess_operator(self, x):
        w = self._weights(x)
        A = self._A
        return lambda v: np.asarray(A.T @ (w * (A @ v))).ravel()

    def hess_dense(self, x):
        if not self.has_dense_hessian:
            raise NotImplementedError("dense Hessian disabled above "
                                      f"{DENSE_HESSIAN_MAX_DIM} variables")
        w = self._weights(x)
        A = self._A
        if sp.issparse(A):
            H = (A.T @ sp.diags(w) @ A).toarray()
        else:
            H = A.T @ (w[:, None] * A)
        return 0.5 * (H + H.T)


class MultinomialOracle(SmoothOracle):
    """Multinomial logistic loss over an (m, p) matrix flattened row-major.

    The reference class has its logits fixed at zero.  ``M_f`` is
    ``sqrt(6) * N^-1 * max_j ||w_j||``.  Because the loss is an average and
    positive scaling leaves the SCL constant unchanged, that value can
    undercut the true constant when ``N > 1``; ``M_f_sound`` drops the
    ``N^-1`` factor and is a valid bound for any ``N``.  Pass
    ``sound_constant=True`` to make ``M_f`` use it.
    """

    def __init__(self, data: MultinomialData, sound_constant=False):
        self.data = data
        self._W = data.samples
        self._Y = data.labels
        self._N, self.p = self._W.shape
        self.m = data.n_classes
        self.dim = self.m * self.p
        self.M_f_sound = float(np.sqrt(6.0) * _rows_norm(self._W).max())
        self.M_f = self.M_f_sound if sound_constant else self.M_f_sound / self._N

    def _logits(self, x):
        X = _check_vec(x, self.dim).reshape(self.m, self.p)
        return np.asarray(self._W @ X.T)  # (N, m)

    def _probs(self, Z):
        zmax = np.maximum(Z.max(axis=1, keepdims=True), 0.0)
        E = np.exp(Z - zmax)
        denom = np.exp(-zmax) + E.sum(axis=1, keepdims=True)
        return E / denom, zmax.ravel() + np.log(denom.ravel())

    def value(self, x):
        Z = self._logits(x)
        _, lse = self._probs(Z)
        val = np.mean(lse - np.sum(self._Y * Z, axis=1))
        return float(check_finite(val, "multinomial value"))

    def grad(self, x):
        P, _ = self._probs(self._logits(x))
        G = np.asarray(self._W.T @ (P - self._Y)).T / self._N
        return check_finite(G.ravel(), "multinomial grad")

    def value_grad(self, x):
        Z = self._logits(x)
        P, lse = self._probs(Z)
        val = float(check_finite(np.mean(lse - np.sum(self._Y * Z, axis=1)),
                                 "multinomial value"))
        G = np.asarray(self._W.T @ (P - self._Y)).T / self._N
        return val, G.ravel()

    def _hv(self, P, v):
        V = _check_vec(v, self.dim).reshape(self.m, self.p)
        A = np.asarray(self._W @ V.T)
        PA = P * A
        B = PA - P * PA.sum(axis=1, keepdims=True)
        return (np.asarray(self._W.T @ B).T / self._N).ravel()

    def hess_vec(self, x, v):
        P, _ = self._probs(self._logits(x))
        return self._hv(P, v)

    def hess_operator(self, x):
        P, _ = self._probs(self._logits(x))
        return lambda v: self._hv(P, v)


class ExpSumOracle(SmoothOracle):
    """``f(x) = sum_i exp(<a_i, x> + b_i) + <c, x>``; gradient is not Lipschitz."""

    def __init__(self, data: ExpSumData):
        self.data = data
        self._A = data.exponents
        self._b = data.offsets
        self._c = data.linear
        self.dim = self._A.shape[1]
        self.M_f = float(np.linalg.norm(self._A, axis=1).max())
        self.has_dense_hessian = self.dim <= DENSE_HESSIAN_MAX_DIM

    def _terms(self, x):
        x = _check_vec(x, self.dim)
        t = self._A @ x + self._b
        with np.errstate(over="ignore"):
            e = np.exp(t)
        if not np.all(np.isfinite(e)):
            i = int(np.flatnonzero(~np.isfinite(e))[0])
            raise NonFiniteError("exp-sum term", i, f"exponent {t[i]:.4g} overflows")
        return x, e

    def value(self, x):
        x, e = self._terms(x)
        return float(check_finite(e.sum() + self._c @ x, "exp-sum value"))

    def grad(self, x):
        _, e = self._terms(x)
        return check_finite(self._A.T @ e + self._c, "exp-sum grad")

    def hess_vec(self, x, v):
        v = _check_vec(v, self.dim)
        _, e = self._terms(x)
        return self._A.T @ (e * (self._A @ v))

    def hess_operator(self, x):
        _, e = self._terms(x)
        A = self._A
        return lambda v: A.T @ (e * (A @ v))

    def hess_dense(self, x):
        _, e = self._terms(x)
        H = self._A.T @ (e[:, None] * self._A)
        return 0.5 * (H + H.T)


class QuadraticOracle(SmoothOracle):
    """``f(x) = 1/2 <Ax, x> - <b, x>`` with symmetric PSD ``A``."""

    has_dense_hessian = True

    def __init__(self, A, b=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("quadratic matrix must be square")
        if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14):
            raise ValueError("quadratic matrix must be symmetric")
        self.A = 0.5 * (A + A.T)
        self.dim = A.shape[0]
        self.b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float).ravel()
        if self.b.size != self.dim:
            raise ValueError("b has the wrong length")
        self.M_f = 0.0

    def value(self, x):
        x = _check_vec(x, self.dim)
        return float(0.5 * x @ (self.A @ x) - self.b @ x)

    def grad(self, x):
        return self.A @ _check_vec(x, self.dim) - self.b

    def hess_vec(self, x, v):
        return self.A @ _check_vec(v, self.dim)

    def hess_dense(self, x):
        return self.A.copy()


def logistic_oracle(data: LogisticData) -> LogisticOracle:
    return LogisticOracle(data)


def multinomial_oracle(data: MultinomialData, sound_constant=False) -> MultinomialOracle:
    return MultinomialOracle(data, sound_constant)


def expsum_oracle(data: ExpSumData) -> ExpSumOracle:
    return ExpSumOracle(data)


def quadratic_oracle(A, b=None) -> QuadraticOracle:
    return QuadraticOracle(A, b)


# ---------------------------------------------------------------------------
# ready-made composite problems


def l1_weights(n_features, rho, n_samples, include_bias=False):
    """Per-coordinate l1 weights ``rho / sqrt(N)``, zero on the bias."""
    w = np.full(n_features, rho / np.sqrt(n_samples))
    if include_bias:
        w = np.append(w, 0.0)
    return w


def logistic_problem(data: LogisticData, rho, name="logistic"):
    """Sparse logistic regression with penalty ``rho * N^{-1/2} * ||x||_1``."""
    oracle = LogisticOracle(data)
    g = L1Norm(l1_weights(data.n_features, rho, data.n_samples, data.include_bias))
    return ProblemInstance(oracle, g, name=name)


def multinomial_problem(data: MultinomialData, rho, name="multinomial",
                        sound_constant=False):
    oracle = MultinomialOracle(data, sound_constant)
    g = L1Norm(np.full(oracle.dim, float(rho)))
    return ProblemInstance(oracle, g, name=name)
