"""
Importance-sparsified solvers: Spar-GW, Spar-FGW and Spar-UGW.

A sampling probability matrix P over the m x n cells is built once, a key set S
is drawn from it, and every outer round works only on S: O(s^2) contraction,
O(H s) Sinkhorn.
"""

import time
import numpy as np

from spar_gw.source.core_types_gw import (
    GWProblem, GroundCost, SparseMatrix, ValidationError, InvalidRegularizer, DimensionMismatch,
    as_array, plan_mass)
from spar_gw.source.contraction_gw import contract_sparse, contract_rank_one, contract_naive, inner_product, NAIVE_SIZE_LIMIT
from spar_gw.source.sinkhorn_gw import build_kernel, sinkhorn_balanced, sinkhorn_unbalanced
from spar_gw.source.dense_solvers_gw import (
    SolverConfig, GwResult, marginal_penalty, ugw_objective, rescale_mass, check_features, check_objective,
    fused_value, report_round)

IID = 'iid'
POISSON = 'poisson'
FULL = 'full'
SAMPLING_MODES = (IID, POISSON, FULL)

DEFAULT_S_FACTOR = 16


class SamplingPlan:

    """
    Drawn key set S with everything needed to reweight the kernel on it.

    Attributes
    ----------
    P : np.ndarray
        m x n sampling probabilities.
    rows, cols : np.ndarray
        Distinct drawn keys, sorted row-major.
    counts : np.ndarray
        Multiplicity of each key (iid); ones otherwise.
    s : float
        Nominal subsample size.
    mode : str
        'iid', 'poisson' or 'full'.
    seed : int
        Seed of the draw.

    """

    def __init__(self, P: np.ndarray, rows: np.ndarray, cols: np.ndarray, counts: np.ndarray, s: float, mode: str, seed: int):
        self.P = P
        self.rows = rows
        self.cols = cols
        self.counts = counts
        self.s = s
        self.mode = mode
        self.seed = seed

    @property
    def shape(self):
        return self.P.shape

    @property
    def support_size(self):
        return self.rows.size

    @property
    def inclusion_probabilities(self):

        """p*_ij = min(1, s P_ij) on the drawn keys (Poisson mode)."""

        return np.minimum(1.0, self.s * self.P[self.rows, self.cols])

    def kernel_weights(self, dedup_weights: bool = False) -> np.ndarray:

        """
        Per-key kernel multiplier.

        iid: c_ij / (s P_ij), or 1 / (s P_ij) with dedup_weights;
        poisson: 1 / p*_ij; full: 1.
        """

        if self.mode == FULL:
            return np.ones(self.rows.size)
        if self.mode == POISSON:
            return 1.0 / self.inclusion_probabilities
        p = self.P[self.rows, self.cols]
        if dedup_weights:
            return 1.0 / (self.s * p)
        return self.counts / (self.s * p)

    def sparse(self, values) -> SparseMatrix:

        """SparseMatrix over S with the given per-key values."""

        return SparseMatrix(self.rows, self.cols, values, self.shape, sort=False)

    def __repr__(self):
        return 'SamplingPlan(mode=%s, s=%g, distinct=%d, seed=%s)' % (self.mode, self.s, self.support_size, self.seed)


def _normalize(W: np.ndarray) -> np.ndarray:
    total = W.sum()
    if not (np.isfinite(total) and total > 0):
        raise ValidationError('Sampling weights have no positive finite mass.')
    return W / total


def gw_sampling_probabilities(a, b) -> np.ndarray:

    """
    P_ij = sqrt(a_i b_j) / sum_kl sqrt(a_k b_l).

    Parameters
    ----------
    a, b : Distribution or np.ndarray
        Marginal weights.

    Returns
    -------
    np.ndarray
        m x n probability matrix.

    """

    return _normalize(np.sqrt(np.outer(as_array(a), as_array(b))))


def ugw_sampling_probabilities(a, b, Cx, Cy, L: GroundCost, lam: float, eps: float, allow_large_naive: bool = False,
                               size_limit: int = NAIVE_SIZE_LIMIT) -> np.ndarray:

    """
    Sampling probabilities for unbalanced problems.

    P_ij is proportional to (a_i b_j)^(lam / (2 lam + eps)) * K_ij^(eps / (2 lam + eps)), where
    K = exp(-C_un(T0) / (eps m(T0))) * T0 and T0 = a b^T / sqrt(m(a) m(b)).
    Evaluated in the log domain.

    Parameters
    ----------
    a, b : Distribution or np.ndarray
        Positive weights.
    Cx, Cy : RelationMatrix or np.ndarray
        Relation matrices.
    L : GroundCost
        Ground cost; the rank-one path is used when it is decomposable.
    lam, eps : float
        Marginal relaxation and regularization, both > 0.
    allow_large_naive : bool
        Permit the naive contraction above the size guard.
    size_limit : int
        Size guard of the naive contraction.

    Returns
    -------
    np.ndarray
        m x n probability matrix.

    """

    if not (lam > 0 and eps > 0):
        raise InvalidRegularizer('lambda and eps must be > 0, got %r, %r.' % (lam, eps))
    a, b = as_array(a), as_array(b)
    scale = 1.0 / np.sqrt(a.sum() * b.sum())
    T0 = scale * np.outer(a, b)
    m0 = T0.sum()

    if L.decomposable:
        C = contract_rank_one(Cx, Cy, L, a, b, scale=scale).values
    else:
        C = contract_naive(Cx, Cy, L, T0, allow_large_naive=allow_large_naive, size_limit=size_limit).values
    cost = C + marginal_penalty(T0, a, b, lam)

    with np.errstate(divide='ignore'):
        log_ab = np.log(np.outer(a, b))
        log_K = -cost / (eps * m0) + np.log(T0)
    log_w = (lam * log_ab + eps * log_K) / (2 * lam + eps)
    finite = np.isfinite(log_w)
    shift = log_w[finite].max() if finite.any() else 0.0
    return _normalize(np.where(finite, np.exp(log_w - shift), 0.0))


def _check_probabilities(P: np.ndarray):
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or np.any(P < 0) or not np.all(np.isfinite(P)):
        raise ValidationError('Sampling probabilities must be a finite non-negative matrix.')
    if abs(P.sum() - 1.0) > 1e-12:
        raise ValidationError('Sampling probabilities sum to %.17g, not 1.' % P.sum())
    return P


def draw_sample(P: np.ndarray, s, mode: str = IID, seed: int = 0) -> SamplingPlan:

    """
    Draw the key set S from P.

    iid: s categorical draws over the m n cells, duplicates collapsed into multiplicities.
    poisson: each cell kept independently with probability min(1, s P_ij); s may be fractional.
    full: every cell with P_ij > 0, s ignored.

    Deterministic given (P, s, mode, seed).
    """

    P = _check_probabilities(P)
    if mode not in SAMPLING_MODES:
        raise ValidationError('Unknown sampling mode %r, choose one of %s.' % (mode, ', '.join(SAMPLING_MODES)))
    m, n = P.shape
    flat = P.ravel()

    if mode == FULL:
        keys = np.flatnonzero(flat > 0)
        counts = np.ones(keys.size)
        s = float(keys.size) if s is None else s
    else:
        if s is None or not s > 0:
            raise ValidationError('Subsample size must be positive, got %r.' % s)
        rng = np.random.default_rng(seed)
        if mode == IID:
            if int(s) != s or s < 1:
                raise ValidationError('iid sampling needs an integer s >= 1, got %r.' % s)
            s = int(s)
            draws = rng.choice(flat.size, size=s, p=flat)
            keys, counts = np.unique(draws, return_counts=True)
            counts = counts.astype(np.float64)
        else:
            keep = rng.random(flat.size) < np.minimum(1.0, s * flat)
            keys = np.flatnonzero(keep & (flat > 0))
            counts = np.ones(keys.size)

    return SamplingPlan(P, keys // n, keys % n, counts, s, mode, seed)


def sparsify_kernel_poisson(K: np.ndarray, plan: SamplingPlan) -> SparseMatrix:

    """K~_ij = K_ij / p*_ij on the kept cells, zero elsewhere."""

    if plan.mode != POISSON:
        raise ValidationError('sparsify_kernel_poisson needs a Poisson sampling plan, got %r.' % plan.mode)
    K = np.asarray(K, dtype=np.float64)
    if K.shape != plan.shape:
        raise DimensionMismatch('Kernel shape %s does not match the sampling plan %s.' % (K.shape, plan.shape))
    return plan.sparse(K[plan.rows, plan.cols] / plan.inclusion_probabilities)


def default_subsample_size(problem: GWProblem) -> int:
    return DEFAULT_S_FACTOR * max(problem.shape)


def _sparse_cost(values: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    if cfg.zero_cost_to_inf:
        values = np.where(values == 0, np.inf, values)
    return values


def _extras(plan: SamplingPlan) -> dict:
    return {'sampling_plan': plan, 'support_size': plan.support_size, 'mode': plan.mode, 's': plan.s, 'seed': plan.seed}


def _solve_balanced_sparse(problem: GWProblem, L: GroundCost, cfg: SolverConfig, s, mode, seed, method: str, M: np.ndarray = None, alpha: float = 1.0) -> GwResult:

    """Shared outer loop of Spar-GW and Spar-FGW."""

    if not problem.balanced:
        raise ValidationError('%s needs balanced distributions.' % method)
    a, b = problem.a.weights, problem.b.weights
    if s is None:
        s = default_subsample_size(problem)

    plan = draw_sample(gw_sampling_probabilities(a, b), s, mode, seed)
    weights = plan.kernel_weights(cfg.dedup_weights)
    M_S = None if M is None else M[plan.rows, plan.cols]
    T = plan.sparse(a[plan.rows] * b[plan.cols])

    objective_trace, time_trace = [], []
    start_time = time.perf_counter()

    for r in range(1, cfg.R + 1):
        C = contract_sparse(problem.Cx, problem.Cy, L, T, chunk_size=cfg.chunk_size).values
        objective_trace.append(fused_value(inner_product(C, T), None if M_S is None else float(np.dot(M_S, T.values)), alpha))
        cost = _sparse_cost(fused_value(C.values, M_S, alpha), cfg)
        K = build_kernel(C.with_values(cost), cfg.eps, T if cfg.proximal else None, weights=weights, shift_rows=True)
        T = sinkhorn_balanced(a, b, K, cfg.H, floor=cfg.floor, tol=cfg.tol)
        time_trace.append(time.perf_counter() - start_time)
        report_round(cfg, method, r, objective_trace[-1], T, start_time)

    C = contract_sparse(problem.Cx, problem.Cy, L, T, chunk_size=cfg.chunk_size).values
    distance = fused_value(inner_product(C, T), None if M_S is None else float(np.dot(M_S, T.values)), alpha)
    objective_trace.append(distance)
    return GwResult(check_objective(distance, method), T, objective_trace, time_trace, method, _extras(plan))


def solve_spar_gw(problem: GWProblem, L: GroundCost, cfg: SolverConfig, s=None, mode: str = IID, seed: int = 0) -> GwResult:

    """
    Spar-GW: balanced GW on an importance-sampled key set.

    Parameters
    ----------
    problem : GWProblem
        Balanced instance.
    L : GroundCost
        Any ground cost.
    cfg : SolverConfig
        Solver parameters.
    s : int, optional
        Subsample size, default 16 max(m, n).
    mode : str
        'iid', 'poisson' or 'full'.
    seed : int
        Sampling seed.

    Returns
    -------
    GwResult
        Sparse plan over S and distance = sum over S x S of L T T.

    """

    return _solve_balanced_sparse(problem, L, cfg, s, mode, seed, 'spar-gw')


def solve_spar_fgw(problem: GWProblem, M, L: GroundCost, alpha: float, cfg: SolverConfig, s=None, mode: str = IID, seed: int = 0) -> GwResult:

    """Spar-FGW: cost alpha * (L x T) + (1 - alpha) * M restricted to S."""

    if alpha is None:
        alpha = 0.6 if cfg.alpha is None else cfg.alpha
    if not 0 <= alpha <= 1:
        raise ValidationError('alpha must lie in [0, 1], got %r.' % alpha)
    return _solve_balanced_sparse(problem, L, cfg, s, mode, seed, 'spar-fgw', M=check_features(M, problem), alpha=alpha)


def solve_spar_ugw(problem: GWProblem, L: GroundCost, lam: float, cfg: SolverConfig, s=None, mode: str = IID, seed: int = 0) -> GwResult:

    """
    Spar-UGW: unbalanced GW on a key set drawn from the unbalanced sampling probabilities.

    Per round eps_bar = eps m(T) and lam_bar = lam m(T); the cost on S is the sparse
    contraction plus the scalar marginal penalty E(T); after unbalanced Sinkhorn
    the plan is rescaled by sqrt(m(T_r) / m(T_{r+1})).
    """

    if not (lam is not None and np.isfinite(lam) and lam > 0):
        raise InvalidRegularizer('lambda must be a positive number, got %r.' % lam)
    a, b = problem.a.weights, problem.b.weights
    if s is None:
        s = default_subsample_size(problem)
    method = 'spar-ugw'

    P = ugw_sampling_probabilities(a, b, problem.Cx, problem.Cy, L, lam, cfg.eps,
                                   allow_large_naive=cfg.allow_large_naive, size_limit=cfg.naive_size_limit)
    plan = draw_sample(P, s, mode, seed)
    weights = plan.kernel_weights(cfg.dedup_weights)
    T = plan.sparse(a[plan.rows] * b[plan.cols] / np.sqrt(a.sum() * b.sum()))

    objective_trace, time_trace = [], []
    start_time = time.perf_counter()

    for r in range(1, cfg.R + 1):
        mT = plan_mass(T)
        C = contract_sparse(problem.Cx, problem.Cy, L, T, chunk_size=cfg.chunk_size).values
        objective_trace.append(ugw_objective(inner_product(C, T), T, a, b, lam))
        cost = _sparse_cost(C.values + marginal_penalty(T, a, b, lam), cfg)
        eps_bar, lam_bar = cfg.eps * mT, lam * mT
        K = build_kernel(C.with_values(cost), eps_bar, T if cfg.proximal else None, weights=weights)
        T = rescale_mass(mT, sinkhorn_unbalanced(a, b, K, lam_bar, eps_bar, cfg.H, floor=cfg.floor))
        time_trace.append(time.perf_counter() - start_time)
        report_round(cfg, method, r, objective_trace[-1], T, start_time)

    C = contract_sparse(problem.Cx, problem.Cy, L, T, chunk_size=cfg.chunk_size).values
    distance = ugw_objective(inner_product(C, T), T, a, b, lam)
    objective_trace.append(distance)
    return GwResult(check_objective(distance, method), T, objective_trace, time_trace, method, _extras(plan))
