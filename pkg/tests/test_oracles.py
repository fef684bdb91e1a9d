import math

import numpy as np
import pytest
import scipy.sparse as sp

from sclopt.core import NonFiniteError
from sclopt.oracles import (ExpSumData, LogisticData, MultinomialData, expsum_oracle,
                            l1_weights, logistic_oracle, logistic_problem,
                            multinomial_oracle, quadratic_oracle)
from sclopt.verify import check_definition

from helpers import fd_grad, fd_hess_vec, rel_err, shipped_oracles


def test_logistic_single_sample():
    o = logistic_oracle(LogisticData(np.array([[1.0]]), np.array([1.0]), False))
    assert o.value(np.zeros(1)) == pytest.approx(math.log(2), rel=1e-15)
    assert o.grad(np.zeros(1)) == pytest.approx([-0.5], rel=1e-15)


def test_logistic_random_gradient(rng):
    W = rng.standard_normal((20, 5))
    y = np.where(rng.uniform(size=20) < 0.5, 1.0, -1.0)
    o = logistic_oracle(LogisticData(W, y, True))
    x = rng.standard_normal(6)
    assert rel_err(o.grad(x), fd_grad(o.value, x)) <= 1e-6


def test_logistic_Mf():
    W = np.array([[3.0, 4.0], [1.0, 0.0]])
    o = logistic_oracle(LogisticData(W, np.array([1.0, -1.0]), False))
    assert o.M_f == 5.0


def test_logistic_Mf_counts_bias():
    W = np.array([[3.0, 4.0], [1.0, 0.0]])
    o = logistic_oracle(LogisticData(W, np.array([1.0, -1.0]), True))
    assert o.M_f == pytest.approx(math.sqrt(26.0), rel=1e-15)


def test_logistic_sparse_matches_dense(rng):
    W = rng.standard_normal((15, 6)) * (rng.uniform(size=(15, 6)) < 0.4)
    y = np.where(rng.uniform(size=15) < 0.5, 1.0, -1.0)
    od = logistic_oracle(LogisticData(W, y, True))
    os_ = logistic_oracle(LogisticData(sp.csr_matrix(W), y, True))
    x, v = rng.standard_normal(7), rng.standard_normal(7)
    assert od.value(x) == pytest.approx(os_.value(x), rel=1e-14)
    assert np.allclose(od.grad(x), os_.grad(x), rtol=1e-13, atol=1e-15)
    assert np.allclose(od.hess_vec(x, v), os_.hess_vec(x, v), rtol=1e-13, atol=1e-15)
    assert np.allclose(od.hess_dense(x), os_.hess_dense(x), rtol=1e-13, atol=1e-15)


def test_logistic_no_overflow_for_large_margins():
    o = logistic_oracle(LogisticData(np.array([[1.0]]), np.array([1.0]), False))
    assert o.value(np.array([-800.0])) == pytest.approx(800.0, rel=1e-15)
    assert o.value(np.array([800.0])) == pytest.approx(0.0, abs=1e-300)
    assert np.isfinite(o.grad(np.array([-800.0]))).all()


def test_logistic_rejects_bad_labels():
    with pytest.raises(ValueError):
        LogisticData(np.ones((2, 1)), np.array([1.0, 0.0]), False)


def test_multinomial_zero_logits():
    # one non-reference class, X = 0, every y = 0: each sample contributes ln 2
    W = np.arange(6.0).reshape(3, 2)
    o = multinomial_oracle(MultinomialData(W, np.zeros((3, 1))))
    assert o.dim == 2
    assert o.value(np.zeros(2)) == pytest.approx(math.log(2), rel=1e-15)


def test_multinomial_random_gradient(rng):
    W = rng.standard_normal((10, 4))
    cls = rng.integers(0, 4, 10)
    o = multinomial_oracle(MultinomialData.from_classes(W, cls, 4))
    assert o.dim == 12
    x = rng.standard_normal(12)
    assert rel_err(o.grad(x), fd_grad(o.value, x)) <= 1e-6


def test_multinomial_Mf_single_sample():
    W = np.array([[0.6, 0.8]])
    o = multinomial_oracle(MultinomialData(W, np.array([[1.0, 0.0]])))
    assert o.M_f == pytest.approx(math.sqrt(6), rel=1e-15)


def test_multinomial_Mf_formula_exact(rng):
    W = rng.standard_normal((17, 3))
    o = multinomial_oracle(MultinomialData.from_classes(W, rng.integers(0, 3, 17), 3))
    assert o.M_f == np.sqrt(6.0) * np.linalg.norm(W, axis=1).max() / 17
    assert o.M_f_sound == pytest.approx(17 * o.M_f, rel=1e-15)


def test_multinomial_overflow_guard():
    W = np.array([[1.0]])
    o = multinomial_oracle(MultinomialData(W, np.array([[1.0, 0.0]])))
    val = o.value(np.array([2000.0, 1000.0]))
    assert val == pytest.approx(0.0, abs=1e-12)
    assert np.isfinite(o.grad(np.array([2000.0, -1000.0]))).all()


def test_multinomial_rejects_two_hot():
    with pytest.raises(ValueError):
        MultinomialData(np.ones((1, 2)), np.array([[1.0, 1.0]]))


def test_expsum_constant_exponent():
    o = expsum_oracle(ExpSumData(np.zeros((1, 3)), np.zeros(1), np.zeros(3)))
    x = np.array([1.0, -2.0, 7.0])
    assert o.value(x) == 1.0
    assert np.array_equal(o.grad(x), np.zeros(3))


def test_expsum_random_hess_vec(rng):
    A = rng.standard_normal((6, 4))
    o = expsum_oracle(ExpSumData(A, rng.standard_normal(6), rng.standard_normal(4)))
    x, v = 0.3 * rng.standard_normal(4), rng.standard_normal(4)
    assert rel_err(o.hess_vec(x, v), fd_hess_vec(o.grad, x, v)) <= 1e-5


def test_expsum_Mf():
    A = np.array([[1.0, 0.0], [0.0, 2.0]])
    o = expsum_oracle(ExpSumData(A, np.zeros(2), np.zeros(2)))
    assert o.M_f == 2.0


def test_expsum_overflow_is_reported():
    o = expsum_oracle(ExpSumData(np.array([[1.0]]), np.zeros(1), np.zeros(1)))
    with pytest.raises(NonFiniteError):
        o.value(np.array([710.0]))
    with pytest.raises(NonFiniteError):
        o.grad(np.array([710.0]))


def test_quadratic_identity_gradient(rng):
    o = quadratic_oracle(np.eye(4))
    x = rng.standard_normal(4)
    assert np.array_equal(o.grad(x), x)
    assert o.M_f == 0.0


def test_quadratic_hess_vec(rng):
    B = rng.standard_normal((4, 4))
    A = B @ B.T
    o = quadratic_oracle(A, rng.standard_normal(4))
    v = rng.standard_normal(4)
    assert np.allclose(o.hess_vec(rng.standard_normal(4), v), A @ v, rtol=1e-14)


def test_quadratic_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        quadratic_oracle(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_quadratic_definition_check_passes(rng):
    o = quadratic_oracle(np.diag([1.0, 3.0]))
    for _ in range(20):
        rep = check_definition(o, rng.standard_normal(2), rng.standard_normal(2))
        assert rep.violations == 0


@pytest.mark.parametrize("name", ["logistic", "multinomial", "expsum", "quadratic"])
def test_convexity_sampled(name, rng):
    o = shipped_oracles()[name]
    for _ in range(100):
        x, v = rng.standard_normal(o.dim), rng.standard_normal(o.dim)
        assert o.hess_vec(x, v) @ v >= -1e-10


def test_l1_weights_scale_and_bias():
    w = l1_weights(3, 0.4, 16, include_bias=True)
    assert np.array_equal(w, [0.1, 0.1, 0.1, 0.0])


def test_logistic_problem_does_not_penalize_bias(rng):
    data = LogisticData(rng.standard_normal((9, 2)), np.ones(9), True)
    p = logistic_problem(data, 0.3)
    x = np.array([0.0, 0.0, 5.0])
    assert p.nonsmooth.value(x) == 0.0
