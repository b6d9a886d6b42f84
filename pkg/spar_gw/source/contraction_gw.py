"""
Tensor-matrix contraction (L x T)_ij = sum_{i',j'} L(Cx[i,i'], Cy[j,j']) T[i',j'].

Four evaluation paths: naive O(m^2 n^2), decomposable O(m^2 n + m n^2),
sparse over a key set of size s O(s^2), and rank-one plans O(m^2 + n^2 + mn).
"""

import numpy as np
from typing import Union

from spar_gw.source.core_types_gw import (
    GroundCost, RelationMatrix, SparseMatrix, DimensionMismatch, IndexOutOfRange,
    MissingDecomposition, ValidationError, as_array)

NAIVE_SIZE_LIMIT = 1000
SPARSE_CHUNK_SIZE = 256


class CostMatrixResult:

    """
    Result of a contraction.

    Attributes
    ----------
    values : np.ndarray or SparseMatrix
        Dense m x n matrix, or sparse over the plan's key set.
    provenance : str
        'naive', 'decomposable', 'sparse' or 'rank_one'.

    """

    def __init__(self, values: Union[np.ndarray, SparseMatrix], provenance: str):
        self.values = values
        self.provenance = provenance

    @property
    def shape(self):
        return self.values.shape

    def to_dense(self):
        if isinstance(self.values, SparseMatrix):
            return self.values.to_dense()
        return self.values

    def __repr__(self):
        return 'CostMatrixResult(shape=%s, provenance=%s)' % (self.shape, self.provenance)


def _check_shapes(Cx: np.ndarray, Cy: np.ndarray, shape):
    if shape != (Cx.shape[0], Cy.shape[0]):
        raise DimensionMismatch('Plan has shape %s but relation matrices are %dx%d and %dx%d.' % (shape, Cx.shape[0], Cx.shape[0], Cy.shape[0], Cy.shape[0]))


def _check_domain(L: GroundCost, Cx: np.ndarray, Cy: np.ndarray):
    if L.kind == 'kl':
        L.check_domain(Cx, Cy)


def contract_naive(Cx: RelationMatrix, Cy: RelationMatrix, L: GroundCost, T: np.ndarray, allow_large_naive: bool = False, size_limit: int = NAIVE_SIZE_LIMIT) -> CostMatrixResult:

    """
    Evaluate L x T directly from the definition, valid for any ground cost.

    Parameters
    ----------
    Cx, Cy : RelationMatrix or array
        Relation matrices (m x m and n x n).
    L : GroundCost
        Ground cost.
    T : np.ndarray
        Dense m x n plan.
    allow_large_naive : bool
        Skip the size guard.
    size_limit : int
        Largest max(m, n) accepted without allow_large_naive.

    Returns
    -------
    CostMatrixResult
        Dense result, provenance 'naive'.

    """

    Cx, Cy, T = as_array(Cx), as_array(Cy), np.asarray(T, dtype=np.float64)
    _check_shapes(Cx, Cy, T.shape)
    _check_domain(L, Cx, Cy)
    m, n = T.shape
    if max(m, n) > size_limit and not allow_large_naive:
        raise ValidationError('Naive contraction refused for size %d > %d (set allow_large_naive).' % (max(m, n), size_limit))

    out = np.empty((m, n))
    for i in range(m):
        # block[i', j, j'] = L(Cx[i, i'], Cy[j, j'])
        block = L(Cx[i][:, None, None], Cy[None, :, :])
        out[i] = np.einsum('kjl,kl->j', block, T)
    return CostMatrixResult(out, 'naive')


def contract_decomposable(Cx: RelationMatrix, Cy: RelationMatrix, L: GroundCost, T: np.ndarray) -> CostMatrixResult:

    """
    L x T = f1(Cx) p 1^T + 1 (f2(Cy) q)^T - h1(Cx) T h2(Cy)^T with p = T 1, q = T^T 1.
    """

    if not L.decomposable:
        raise MissingDecomposition('Ground cost %r has no (f1, f2, h1, h2) decomposition.' % L.kind)
    Cx, Cy, T = as_array(Cx), as_array(Cy), np.asarray(T, dtype=np.float64)
    _check_shapes(Cx, Cy, T.shape)
    _check_domain(L, Cx, Cy)
    f1, f2, h1, h2 = L.decomposition

    p, q = T.sum(axis=1), T.sum(axis=0)
    out = (f1(Cx) @ p)[:, None] + (f2(Cy) @ q)[None, :] - h1(Cx) @ T @ h2(Cy).T
    return CostMatrixResult(out, 'decomposable')


def contract_rank_one(Cx: RelationMatrix, Cy: RelationMatrix, L: GroundCost, x: np.ndarray, y: np.ndarray, scale: float = 1.0) -> CostMatrixResult:

    """
    L x T for the rank-one plan T = scale * x y^T without forming T inside the quadratic term.

    h1(Cx) T h2(Cy)^T = scale * (h1(Cx) x)(h2(Cy) y)^T.
    """

    if not L.decomposable:
        raise MissingDecomposition('Ground cost %r has no (f1, f2, h1, h2) decomposition.' % L.kind)
    Cx, Cy = as_array(Cx), as_array(Cy)
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    _check_shapes(Cx, Cy, (x.size, y.size))
    _check_domain(L, Cx, Cy)
    f1, f2, h1, h2 = L.decomposition

    p = scale * x * y.sum()
    q = scale * y * x.sum()
    out = (f1(Cx) @ p)[:, None] + (f2(Cy) @ q)[None, :] - scale * np.outer(h1(Cx) @ x, h2(Cy) @ y)
    return CostMatrixResult(out, 'rank_one')


def contract_sparse(Cx: RelationMatrix, Cy: RelationMatrix, L: GroundCost, T: SparseMatrix, chunk_size: int = SPARSE_CHUNK_SIZE) -> CostMatrixResult:

    """
    Evaluate (L x T)_ij only at the keys of T, summing only over the keys of T.

    For (i, j) in S: sum_{(i',j') in S} L(Cx[i,i'], Cy[j,j']) T[i',j'].
    Work is O(s^2), memory O(chunk_size * s).

    Parameters
    ----------
    Cx, Cy : RelationMatrix or array
        Relation matrices.
    L : GroundCost
        Any ground cost.
    T : SparseMatrix
        Plan stored over the key set S.
    chunk_size : int
        Number of output keys evaluated per block.

    Returns
    -------
    CostMatrixResult
        SparseMatrix over the same keys, provenance 'sparse'.

    """

    Cx, Cy = as_array(Cx), as_array(Cy)
    if not isinstance(T, SparseMatrix):
        raise ValidationError('contract_sparse expects a SparseMatrix plan.')
    m, n = Cx.shape[0], Cy.shape[0]
    if T.nnz and (T.rows.max() >= m or T.cols.max() >= n):
        raise IndexOutOfRange('Plan keys exceed relation matrix sizes (%d, %d).' % (m, n))
    if T.shape != (m, n):
        raise DimensionMismatch('Plan shape %s does not match (%d, %d).' % (T.shape, m, n))

    rows, cols, t = T.rows, T.cols, T.values
    _check_domain(L, Cx, Cy)

    out = np.empty(rows.size)
    chunk_size = max(1, int(chunk_size))
    for k0 in range(0, rows.size, chunk_size):
        k1 = min(k0 + chunk_size, rows.size)
        block = L(Cx[rows[k0:k1]][:, rows], Cy[cols[k0:k1]][:, cols])
        out[k0:k1] = block @ t
    return CostMatrixResult(T.with_values(out), 'sparse')


def contract(Cx: RelationMatrix, Cy: RelationMatrix, L: GroundCost, T, allow_large_naive: bool = False, chunk_size: int = SPARSE_CHUNK_SIZE,
             size_limit: int = NAIVE_SIZE_LIMIT) -> CostMatrixResult:

    """Dispatch to the fastest applicable path."""

    if isinstance(T, SparseMatrix):
        return contract_sparse(Cx, Cy, L, T, chunk_size=chunk_size)
    if L.decomposable:
        return contract_decomposable(Cx, Cy, L, T)
    return contract_naive(Cx, Cy, L, T, allow_large_naive=allow_large_naive, size_limit=size_limit)


def inner_product(C, T) -> float:

    """<C, T>; both dense, or both sparse over the same key set."""

    if isinstance(C, CostMatrixResult):
        C = C.values
    if isinstance(T, SparseMatrix):
        c = C.values if isinstance(C, SparseMatrix) else C[T.rows, T.cols]
        return float(np.dot(c, T.values))
    return float(np.sum(C * T))
