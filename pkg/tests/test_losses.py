import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from inexact_pg.groups import GroupStructure
from inexact_pg.losses import (
    Dataset,
    LogisticLoss,
    QuadraticLoss,
    logistic_gradient,
    logistic_lipschitz,
    logistic_value,
    quadratic_model,
)
from oracles import block_soft_threshold, central_difference, logistic_value_mp


def random_data(seed, N=30, n=8, density=0.5):
    rng = np.random.default_rng(seed)
    X = sp.random(N, n, density=density, format="csr", random_state=rng, data_rvs=rng.standard_normal)
    y = rng.choice([-1.0, 1.0], N)
    return Dataset(X, y)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(sp.csr_matrix(np.eye(2)), [1.0, 0.0])
    with pytest.raises(ValueError):
        Dataset(sp.csr_matrix(np.eye(2)), [1.0])
    with pytest.raises(ValueError):
        Dataset(sp.csr_matrix(np.array([[np.nan, 0.0]])), [1.0])
    data = random_data(0)
    with pytest.raises(ValueError):
        data.labels[0] = 2.0


def test_logistic_value_at_zero():
    data = random_data(1)
    assert logistic_value(np.zeros(8), data) == pytest.approx(np.log(2), rel=1e-15)


def test_logistic_value_single_point_limit():
    data = Dataset(sp.csr_matrix([[1.0, 0.0]]), [1.0])
    for t in (0.5, 3.0, 30.0):
        assert logistic_value(np.array([t, 0.0]), data) == pytest.approx(np.log1p(np.exp(-t)), rel=1e-14)
    assert logistic_value(np.array([1e6, 0.0]), data) == 0.0
    assert logistic_value(np.array([-1e6, 0.0]), data) == pytest.approx(1e6)
    assert np.abs(logistic_gradient(np.array([800.0, 0.0]), data)).max() == 0.0


def test_logistic_gradient_at_zero():
    data = random_data(2)
    expected = -(data.features.T @ data.labels) / (2 * data.n_samples)
    np.testing.assert_allclose(logistic_gradient(np.zeros(8), data), expected, rtol=1e-15, atol=1e-16)


@pytest.mark.parametrize("seed", range(5))
def test_logistic_value_matches_extended_precision(seed):
    data = random_data(seed, N=15, n=5)
    x = 3 * np.random.default_rng(100 + seed).standard_normal(5)
    ref = logistic_value_mp(data.features.toarray(), data.labels, x)
    assert logistic_value(x, data) == pytest.approx(ref, rel=1e-12, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_logistic_gradient_finite_differences(seed):
    data = random_data(seed)
    x = np.random.default_rng(seed + 1).standard_normal(8)
    g = logistic_gradient(x, data)
    fd = central_difference(lambda z: logistic_value(z, data), x)
    assert np.max(np.abs(g - fd)) <= 1e-6 * max(1.0, np.max(np.abs(g)))


def test_value_and_gradient_consistent():
    loss = LogisticLoss(random_data(3))
    x = np.random.default_rng(0).standard_normal(8)
    v, g = loss.value_and_gradient(x)
    assert v == loss.value(x)
    np.testing.assert_array_equal(g, loss.gradient(x))


def test_lipschitz_rank_one_and_identity():
    d = np.array([[3.0, 0.0, 4.0]])
    assert logistic_lipschitz(Dataset(sp.csr_matrix(d), [1.0])) == pytest.approx(25.0 / 4, rel=1e-12)
    n = 6
    data = Dataset(sp.identity(n, format="csr"), np.ones(n))
    assert logistic_lipschitz(data) == pytest.approx(1.0 / (4 * n), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_lipschitz_within_one_percent_of_svd(seed):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((20, 10))
    data = Dataset(sp.csr_matrix(D), rng.choice([-1.0, 1.0], 20))
    exact = np.linalg.svd(D, compute_uv=False)[0] ** 2 / (4 * 20)
    assert abs(logistic_lipschitz(data) - exact) <= 0.01 * exact
    assert LogisticLoss(data).lipschitz_estimate() == logistic_lipschitz(data)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_logistic_convex_and_descent(seed):
    data = random_data(seed)
    rng = np.random.default_rng(seed)
    a, b = 3 * rng.standard_normal(8), 3 * rng.standard_normal(8)
    fa, fb = logistic_value(a, data), logistic_value(b, data)
    assert logistic_value(0.5 * (a + b), data) <= 0.5 * (fa + fb) + 1e-14
    g = logistic_gradient(a, data)
    if np.linalg.norm(g) > 1e-8:
        assert logistic_value(a - 1e-3 * g, data) <= fa


def test_quadratic_examples():
    n = 5
    f = quadratic_model(np.eye(n), np.zeros(n))
    np.testing.assert_array_equal(f.gradient(np.zeros(n)), np.zeros(n))
    f = quadratic_model(np.arange(1.0, n + 1), np.zeros(n))
    assert (f.mu, f.L) == (1.0, float(n))
    assert f.lipschitz_estimate() == n
    rng = np.random.default_rng(0)
    M = rng.standard_normal((n, n))
    Q = M @ M.T + np.eye(n)
    f = quadratic_model(Q, rng.standard_normal(n))
    eig = np.linalg.eigvalsh(Q)
    assert f.mu == pytest.approx(eig[0]) and f.L == pytest.approx(eig[-1])
    with pytest.raises(ValueError):
        QuadraticLoss(np.array([1.0, -1.0]), np.zeros(2))
    with pytest.raises(ValueError):
        QuadraticLoss(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))


@pytest.mark.parametrize("seed", range(3))
def test_quadratic_gradient_and_convexity(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((6, 6))
    f = quadratic_model(M @ M.T + 0.1 * np.eye(6), rng.standard_normal(6))
    x = rng.standard_normal(6)
    fd = central_difference(f.value, x)
    assert np.max(np.abs(f.gradient(x) - fd)) <= 1e-6 * max(1.0, np.abs(fd).max())
    a, b = rng.standard_normal(6), rng.standard_normal(6)
    assert f.value(0.5 * (a + b)) <= 0.5 * (f.value(a) + f.value(b)) + 1e-14


def test_identity_quadratic_single_group_is_soft_threshold():
    # argmin 0.5||x||^2 - a^T x + lam ||x||  ==  prox of lam||.|| at a
    a = np.array([3.0, -4.0, 0.0])
    gs = GroupStructure(3, ([0, 1, 2],), [2.0])
    f = quadratic_model(np.ones(3), a)
    x = block_soft_threshold(a, gs, 1.0)
    np.testing.assert_allclose(x, [1.8, -2.4, 0.0])
    # optimality: grad f(x) + lam x/||x|| = 0
    np.testing.assert_allclose(f.gradient(x) + 2.0 * x / np.linalg.norm(x), 0.0, atol=1e-15)
