import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_simplex, uniform
from spar_gw.source.core_types_gw import SparseMatrix, InfeasibleKernel, InvalidRegularizer
from spar_gw.source.sinkhorn_gw import build_kernel, sinkhorn_balanced, sinkhorn_unbalanced, sinkhorn_residual


def test_product_kernel_is_a_fixed_point():
    a, b = random_simplex(4, 0), random_simplex(5, 1)
    K = np.outer(a, b)
    T, state = sinkhorn_balanced(a, b, K, H=1, return_state=True)
    assert_allclose(T, K, rtol=1e-14)
    assert_allclose(state.u, 1.0, rtol=1e-14)


def test_single_cell():
    assert_allclose(sinkhorn_balanced([1.0], [1.0], np.array([[0.5]]), H=1), [[1.0]])


def test_balanced_marginals():
    K = np.random.default_rng(2).random((4, 5)) + 0.1
    a, b = uniform(4), uniform(5)
    T = sinkhorn_balanced(a, b, K, H=500)
    assert sinkhorn_residual(T, a, b) < 1e-8


def test_sparse_kernel_matches_dense():
    K = np.random.default_rng(3).random((4, 4)) + 0.1
    a, b = random_simplex(4, 4), random_simplex(4, 5)
    dense = sinkhorn_balanced(a, b, K, H=30)
    sparse = sinkhorn_balanced(a, b, SparseMatrix.from_dense(K), H=30)
    assert_allclose(sparse.to_dense(), dense, rtol=1e-12)


def test_infeasible_kernel():
    K = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(InfeasibleKernel):
        sinkhorn_balanced([0.5, 0.5], [0.5, 0.5], K, H=10)
    K = SparseMatrix([0, 0], [0, 1], [1.0, 1.0], (2, 2))
    with pytest.raises(InfeasibleKernel):
        sinkhorn_balanced([0.5, 0.5], [0.5, 0.5], K, H=10)


def test_zero_mass_row_without_kernel_is_fine():
    K = np.array([[1.0, 1.0], [0.0, 0.0]])
    T = sinkhorn_balanced([1.0, 0.0], [0.5, 0.5], K, H=20)
    assert_allclose(T, [[0.5, 0.5], [0.0, 0.0]], atol=1e-14)


def test_early_exit():
    K = np.random.default_rng(6).random((3, 3)) + 0.5
    a, b = uniform(3), uniform(3)
    _, state = sinkhorn_balanced(a, b, K, H=10000, tol=1e-9, return_state=True)
    assert state.n_iter < 10000


def test_unbalanced_large_lambda_matches_balanced():
    K = np.random.default_rng(7).random((4, 4)) + 0.2
    a, b = uniform(4), uniform(4)
    balanced = sinkhorn_balanced(a, b, K, H=50)
    unbalanced = sinkhorn_unbalanced(a, b, K, lam_bar=1e6, eps_bar=1.0, H=50)
    assert_allclose(unbalanced, balanced, atol=1e-4)


@pytest.mark.parametrize('lam_bar, eps_bar', [(0.5, 0.1), (3.0, 2.0)])
def test_unbalanced_single_cell(lam_bar, eps_bar):
    assert_allclose(sinkhorn_unbalanced([1.0], [1.0], np.array([[1.0]]), lam_bar, eps_bar, H=5), [[1.0]])


def test_unbalanced_stationarity():
    rng = np.random.default_rng(8)
    K = rng.random((4, 4)) + 0.2
    a, b = 0.9 * random_simplex(4, 9), 1.3 * random_simplex(4, 10)
    lam_bar, eps_bar = 1.0, 0.5
    _, state = sinkhorn_unbalanced(a, b, K, lam_bar, eps_bar, H=300, return_state=True)
    u, v = state.u, state.v
    assert_allclose(u ** ((lam_bar + eps_bar) / lam_bar) * (K @ v), a, atol=1e-6)


def test_kernel_row_shift_leaves_plan_unchanged():
    rng = np.random.default_rng(11)
    C = rng.random((4, 5)) * 3
    a, b = uniform(4), uniform(5)
    plain = sinkhorn_balanced(a, b, build_kernel(C, 0.5), H=40)
    shifted = sinkhorn_balanced(a, b, build_kernel(C, 0.5, shift_rows=True), H=40)
    assert_allclose(shifted, plain, rtol=1e-10)


def test_kernel_infinite_cost_is_zero():
    C = SparseMatrix([0, 0, 1], [0, 1, 1], [1.0, np.inf, 2.0], (2, 2))
    K = build_kernel(C, 1.0, shift_rows=True)
    assert_allclose(K.values, [1.0, 0.0, 1.0])


def test_kernel_needs_positive_eps():
    with pytest.raises(InvalidRegularizer):
        build_kernel(np.zeros((2, 2)), 0.0)


@pytest.mark.parametrize('seed', range(10))
def test_balanced_residual_does_not_grow_with_rounds(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(3, 9, size=2)
    K = build_kernel(rng.random((m, n)), 0.05, shift_rows=True)
    a, b = random_simplex(m, seed + 20), random_simplex(n, seed + 40)
    residuals = [sinkhorn_residual(sinkhorn_balanced(a, b, K, H=H), a, b) for H in (10, 50, 250)]
    assert residuals[1] <= residuals[0] + 1e-15
    assert residuals[2] <= residuals[1] + 1e-15


def _kernel_with_zeros(seed):
    rng = np.random.default_rng(seed)
    K = rng.random((5, 6)) + 0.1
    K[rng.random((5, 6)) < 0.4] = 0.0
    # one positive entry per row and column keeps it feasible
    K[np.arange(5), np.arange(5)] = 1.0
    K[0, 5] = 1.0
    return K


@pytest.mark.parametrize('seed', range(5))
def test_plan_keeps_the_kernel_zero_pattern(seed):
    K = _kernel_with_zeros(seed)
    a, b = random_simplex(5, seed), random_simplex(6, seed + 10)
    for T in (sinkhorn_balanced(a, b, K, H=50), sinkhorn_unbalanced(1.5 * a, 0.5 * b, K, 1.0, 0.1, H=50)):
        assert np.all(T[K == 0] == 0.0)
        assert np.all(T[K > 0] > 0.0)

    sparse = SparseMatrix.from_dense(K, np.ones(K.shape, dtype=bool))
    for T in (sinkhorn_balanced(a, b, sparse, H=50), sinkhorn_unbalanced(1.5 * a, 0.5 * b, sparse, 1.0, 0.1, H=50)):
        assert T.nnz == K.size
        assert np.all(T.values[sparse.values == 0] == 0.0)
        assert np.all(T.values[sparse.values > 0] > 0.0)
