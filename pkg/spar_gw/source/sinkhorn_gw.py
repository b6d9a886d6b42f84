import numpy as np
from typing import Union

from spar_gw.source.core_types_gw import (
    Distribution, SparseMatrix, DimensionMismatch, InfeasibleKernel, NumericalUnderflow,
    InvalidRegularizer, ValidationError, as_array, marginal_residual)

KERNEL_FLOOR = 1e-300


class ScalingState:

    """
    Sinkhorn scaling vectors after the last completed round.

    Attributes
    ----------
    u, v : np.ndarray
        Row and column scalings, plan = diag(u) K diag(v).
    n_iter : int
        Rounds actually run (less than H only with early exit).

    """

    def __init__(self, u: np.ndarray, v: np.ndarray, n_iter: int):
        self.u = u
        self.v = v
        self.n_iter = n_iter

    def __repr__(self):
        return 'ScalingState(n_iter=%d)' % self.n_iter


def build_kernel(cost, eps: float, T=None, weights=None, shift_rows: bool = False):

    """
    Gibbs kernel exp(-cost / eps), optionally times the previous plan and per-entry weights.

    Parameters
    ----------
    cost : np.ndarray or SparseMatrix
        Cost matrix. +inf entries give a zero kernel entry.
    eps : float
        Regularization strength, > 0.
    T : np.ndarray or SparseMatrix, optional
        Previous plan (proximal step). Must have the same storage as cost.
    weights : np.ndarray, optional
        Per-key multipliers for a sparse kernel (importance weights).
    shift_rows : bool
        Subtract each row's smallest finite cost before exponentiating.
        Balanced Sinkhorn absorbs the shift into u, so the plan is unchanged.

    Returns
    -------
    np.ndarray or SparseMatrix
        The kernel, same storage as cost.

    """

    if not eps > 0:
        raise InvalidRegularizer('eps must be > 0, got %r.' % eps)

    sparse = isinstance(cost, SparseMatrix)
    C = cost.values if sparse else np.asarray(cost, dtype=np.float64)

    if shift_rows:
        finite = np.where(np.isfinite(C), C, np.inf)
        if sparse:
            C = C - _row_shift_sparse(cost.rows, finite, cost.shape[0])
        else:
            cmin = finite.min(axis=1)
            cmin[~np.isfinite(cmin)] = 0.0
            C = C - cmin[:, None]

    K = np.exp(-C / eps)
    if T is not None:
        K = K * (T.values if sparse else T)
    if weights is not None:
        K = K * weights
    return cost.with_values(K) if sparse else K


def _row_shift_sparse(rows: np.ndarray, finite: np.ndarray, m: int) -> np.ndarray:

    """Per-key smallest finite cost of the key's row; keys are sorted row-major."""

    if rows.size == 0:
        return np.zeros(0)
    present, start = np.unique(rows, return_index=True)
    cmin_present = np.minimum.reduceat(finite, start)
    cmin = np.zeros(m)
    cmin[present] = np.where(np.isfinite(cmin_present), cmin_present, 0.0)
    return cmin[rows]


def _matvec(K, v):
    return K.matvec(v) if isinstance(K, SparseMatrix) else K @ v


def _rmatvec(K, u):
    return K.rmatvec(u) if isinstance(K, SparseMatrix) else K.T @ u


def scale_plan(K, u: np.ndarray, v: np.ndarray):

    """diag(u) K diag(v) in the storage of K."""

    if isinstance(K, SparseMatrix):
        return K.with_values(u[K.rows] * K.values * v[K.cols])
    return u[:, None] * K * v[None, :]


def _check_inputs(a, b, K):

    a, b = as_array(a), as_array(b)
    if K.shape != (a.size, b.size):
        raise DimensionMismatch('Kernel shape %s does not match marginals (%d, %d).' % (K.shape, a.size, b.size))
    values = K.values if isinstance(K, SparseMatrix) else K
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValidationError('Kernel entries must be finite and non-negative.')

    if isinstance(K, SparseMatrix):
        positive = (K.values > 0).astype(np.float64)
        row_hits = np.bincount(K.rows, weights=positive, minlength=a.size)
        col_hits = np.bincount(K.cols, weights=positive, minlength=b.size)
    else:
        row_hits = (K > 0).sum(axis=1)
        col_hits = (K > 0).sum(axis=0)
    bad_rows = np.flatnonzero((a > 0) & (row_hits == 0))
    bad_cols = np.flatnonzero((b > 0) & (col_hits == 0))
    if bad_rows.size or bad_cols.size:
        raise InfeasibleKernel('Kernel has no positive entry in rows %s / columns %s with positive mass.' % (bad_rows[:10].tolist(), bad_cols[:10].tolist()))
    return a, b


def _ratio(target: np.ndarray, denom: np.ndarray, floor: float) -> np.ndarray:

    """target / max(denom, floor), with 0 wherever target is 0."""

    out = np.zeros_like(target)
    np.divide(target, np.maximum(denom, floor), out=out, where=target > 0)
    return out


def _check_finite(u, v, it):
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise NumericalUnderflow('Sinkhorn scalings became non-finite at round %d.' % it)


def sinkhorn_balanced(a: Union[Distribution, np.ndarray], b: Union[Distribution, np.ndarray], K, H: int, floor: float = KERNEL_FLOOR, tol: float = None, return_state: bool = False):

    """
    Balanced Sinkhorn scaling: H rounds of u = a / (K v), v = b / (K^T u) from u = v = 1.

    Parameters
    ----------
    a, b : Distribution or np.ndarray
        Target marginals.
    K : np.ndarray or SparseMatrix
        Non-negative kernel.
    H : int
        Number of rounds, >= 1.
    floor : float
        Lower clamp of K v and K^T u.
    tol : float, optional
        Stop early once the row marginal residual is below tol.
    return_state : bool
        Also return the ScalingState.

    Returns
    -------
    plan : np.ndarray or SparseMatrix
        diag(u) K diag(v), same storage as K.
    state : ScalingState
        Only if return_state.

    """

    if H < 1:
        raise ValidationError('Sinkhorn needs H >= 1, got %r.' % H)
    a, b = _check_inputs(a, b, K)

    u = np.ones(a.size)
    v = np.ones(b.size)
    it = 0
    for it in range(1, H + 1):
        u = _ratio(a, _matvec(K, v), floor)
        v = _ratio(b, _rmatvec(K, u), floor)
        _check_finite(u, v, it)
        if tol is not None and np.abs(u * _matvec(K, v) - a).max() < tol:
            break

    plan = scale_plan(K, u, v)
    if return_state:
        return plan, ScalingState(u, v, it)
    return plan


def sinkhorn_unbalanced(a: Union[Distribution, np.ndarray], b: Union[Distribution, np.ndarray], K, lam_bar: float, eps_bar: float, H: int, floor: float = KERNEL_FLOOR, return_state: bool = False):

    """
    Unbalanced Sinkhorn: u = (a / K v)^kappa, v = (b / K^T u)^kappa with kappa = lam_bar / (lam_bar + eps_bar).
    """

    if not (lam_bar > 0 and eps_bar > 0):
        raise InvalidRegularizer('Unbalanced Sinkhorn needs lam_bar > 0 and eps_bar > 0, got %r, %r.' % (lam_bar, eps_bar))
    if H < 1:
        raise ValidationError('Sinkhorn needs H >= 1, got %r.' % H)
    a, b = _check_inputs(a, b, K)
    kappa = lam_bar / (lam_bar + eps_bar)

    u = np.ones(a.size)
    v = np.ones(b.size)
    it = 0
    for it in range(1, H + 1):
        u = _ratio(a, _matvec(K, v), floor) ** kappa
        v = _ratio(b, _rmatvec(K, u), floor) ** kappa
        _check_finite(u, v, it)

    plan = scale_plan(K, u, v)
    if return_state:
        return plan, ScalingState(u, v, it)
    return plan


def sinkhorn_residual(plan, a, b) -> float:
    return marginal_residual(plan, a, b)
