"""
Dense reference solvers: entropic / proximal GW (EGW, PGA-GW), fused GW and unbalanced GW.
All plans are full m x n arrays; each outer round costs one contraction and H Sinkhorn rounds.
"""

import time
import warnings
import numpy as np
from scipy.special import rel_entr

from spar_gw.source.core_types_gw import (
    GWProblem, GroundCost, SparseMatrix, ValidationError, InvalidRegularizer, NonFiniteObjective,
    MassCollapse, DimensionMismatch, plan_marginals, plan_mass)
from spar_gw.source.contraction_gw import contract, contract_rank_one, inner_product, NAIVE_SIZE_LIMIT, SPARSE_CHUNK_SIZE
from spar_gw.source.sinkhorn_gw import build_kernel, sinkhorn_balanced, sinkhorn_unbalanced, KERNEL_FLOOR

ENTROPIC = 'entropic'
PROXIMAL = 'proximal'


class SolverConfig:

    """
    Parameters shared by every solver.

    Attributes
    ----------
    regularizer : str
        'entropic' (K = exp(-C/eps)) or 'proximal' (K = exp(-C/eps) * T).
    eps : float
        Regularization strength, > 0.
    R : int
        Outer rounds.
    H : int
        Sinkhorn rounds per outer round.
    alpha : float or None
        Fused trade-off in [0, 1]; None for non-fused solvers.
    lam : float or None
        Marginal relaxation for unbalanced solvers, > 0.
    tol : float or None
        Optional Sinkhorn early exit.
    floor : float
        Sinkhorn division floor.
    dedup_weights : bool
        IID sampling: weight a distinct key by 1/(s p) instead of count/(s p).
    zero_cost_to_inf : bool
        Sparse solvers: treat exact zero costs on the sample as +inf.
    allow_large_naive : bool
        Allow the naive contraction / rank-one fallback above the size limit.
    naive_size_limit : int
        Size guard for the naive contraction.
    chunk_size : int
        Output keys per block in the sparse contraction.
    verbose : bool
        Print one line per outer round.

    """

    def __init__(self, regularizer: str = PROXIMAL, eps: float = 1e-2, R: int = 20, H: int = 50, alpha: float = None,
                 lam: float = None, tol: float = None, floor: float = KERNEL_FLOOR, dedup_weights: bool = False,
                 zero_cost_to_inf: bool = False, allow_large_naive: bool = False, naive_size_limit: int = NAIVE_SIZE_LIMIT,
                 chunk_size: int = SPARSE_CHUNK_SIZE, verbose: bool = False):

        if regularizer not in (ENTROPIC, PROXIMAL):
            raise InvalidRegularizer('Unknown regularizer %r, use entropic or proximal.' % regularizer)
        if not (np.isfinite(eps) and eps > 0):
            raise InvalidRegularizer('eps must be a positive number, got %r.' % eps)
        if int(R) < 1 or int(H) < 1:
            raise ValidationError('R and H must be >= 1, got R=%r, H=%r.' % (R, H))
        if alpha is not None and not 0 <= alpha <= 1:
            raise ValidationError('alpha must lie in [0, 1], got %r.' % alpha)
        if lam is not None and not (np.isfinite(lam) and lam > 0):
            raise InvalidRegularizer('lambda must be a positive number, got %r.' % lam)

        self.regularizer = regularizer
        self.eps = float(eps)
        self.R = int(R)
        self.H = int(H)
        self.alpha = alpha
        self.lam = lam
        self.tol = tol
        self.floor = floor
        self.dedup_weights = dedup_weights
        self.zero_cost_to_inf = zero_cost_to_inf
        self.allow_large_naive = allow_large_naive
        self.naive_size_limit = naive_size_limit
        self.chunk_size = chunk_size
        self.verbose = verbose

    @property
    def proximal(self):
        return self.regularizer == PROXIMAL

    def replace(self, **changes):

        """Copy with some attributes changed."""

        params = dict(self.__dict__)
        params.update(changes)
        return SolverConfig(**params)

    def __repr__(self):
        return 'SolverConfig(%s, eps=%g, R=%d, H=%d, alpha=%s, lam=%s)' % (self.regularizer, self.eps, self.R, self.H, self.alpha, self.lam)


class GwResult:

    """
    Output of a solver.

    Attributes
    ----------
    distance : float
        Objective at the final plan.
    plan : np.ndarray or SparseMatrix
        Final coupling plan.
    objective_trace : list of float
        Objective at T_0, ..., T_R (length R + 1).
    time_trace : list of float
        Cumulative seconds at the end of each outer round (length R).
    method : str
        Solver name.
    extras : dict
        Solver-specific data (sampling plan, support size).

    """

    def __init__(self, distance: float, plan, objective_trace: list, time_trace: list, method: str, extras: dict = None):
        self.distance = distance
        self.plan = plan
        self.objective_trace = objective_trace
        self.time_trace = time_trace
        self.method = method
        self.extras = extras if extras is not None else {}

    @property
    def n_iter(self):
        return len(self.time_trace)

    def __repr__(self):
        return 'GwResult(method=%s, distance=%.10g, rounds=%d)' % (self.method, self.distance, self.n_iter)


def report_round(cfg: SolverConfig, method: str, r: int, value: float, T, start_time: float):
    if cfg.verbose:
        print('___SPAR GW___: ', '%s round %d/%d, objective %.10g, plan mass %.6g, %.3f s' % (method, r, cfg.R, value, plan_mass(T), time.perf_counter() - start_time))


def check_objective(value: float, method: str):
    if not np.isfinite(value):
        raise NonFiniteObjective('%s produced a non-finite objective (%r).' % (method, value))
    return value


def _contract(problem: GWProblem, L: GroundCost, T, cfg: SolverConfig) -> np.ndarray:
    return contract(problem.Cx, problem.Cy, L, T, allow_large_naive=cfg.allow_large_naive, chunk_size=cfg.chunk_size,
                    size_limit=cfg.naive_size_limit).values


def check_features(M, problem: GWProblem) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.shape != problem.shape:
        raise DimensionMismatch('Feature cost has shape %s, expected %s.' % (M.shape, problem.shape))
    if not np.all(np.isfinite(M)) or np.any(M < 0):
        raise ValidationError('Feature cost must be finite and non-negative.')
    return M


def fused_value(gw_term, feature_term, alpha: float):
    if feature_term is None:
        return gw_term
    return alpha * gw_term + (1 - alpha) * feature_term


def _solve_balanced_dense(problem: GWProblem, L: GroundCost, cfg: SolverConfig, method: str, M: np.ndarray = None, alpha: float = 1.0) -> GwResult:

    """Shared outer loop of the dense GW and fused GW solvers."""

    a, b = problem.a.weights, problem.b.weights
    T = np.outer(a, b)
    objective_trace, time_trace = [], []
    start_time = time.perf_counter()

    for r in range(1, cfg.R + 1):
        C = _contract(problem, L, T, cfg)
        objective_trace.append(fused_value(inner_product(C, T), None if M is None else inner_product(M, T), alpha))
        cost = fused_value(C, M, alpha)
        K = build_kernel(cost, cfg.eps, T if cfg.proximal else None, shift_rows=True)
        T = sinkhorn_balanced(a, b, K, cfg.H, floor=cfg.floor, tol=cfg.tol)
        time_trace.append(time.perf_counter() - start_time)
        report_round(cfg, method, r, objective_trace[-1], T, start_time)

    C = _contract(problem, L, T, cfg)
    distance = fused_value(inner_product(C, T), None if M is None else inner_product(M, T), alpha)
    objective_trace.append(distance)
    return GwResult(check_objective(distance, method), T, objective_trace, time_trace, method)


def solve_gw_dense(problem: GWProblem, L: GroundCost, cfg: SolverConfig) -> GwResult:

    """
    Dense balanced GW by mirror descent: EGW with the entropic regularizer, PGA-GW with the proximal one.

    Parameters
    ----------
    problem : GWProblem
        Balanced instance.
    L : GroundCost
        Ground cost.
    cfg : SolverConfig
        Solver parameters.

    Returns
    -------
    GwResult
        distance = <L x T_R, T_R>.

    """

    if not problem.balanced:
        raise ValidationError('solve_gw_dense needs balanced distributions.')
    method = 'pga-gw' if cfg.proximal else 'egw'
    return _solve_balanced_dense(problem, L, cfg, method)


def solve_fgw_dense(problem: GWProblem, M, L: GroundCost, cfg: SolverConfig) -> GwResult:

    """
    Dense fused GW with cost alpha * (L x T) + (1 - alpha) * M.

    distance = alpha * <L x T_R, T_R> + (1 - alpha) * <M, T_R>.
    """

    if not problem.balanced:
        raise ValidationError('solve_fgw_dense needs balanced distributions.')
    alpha = 0.6 if cfg.alpha is None else cfg.alpha
    return _solve_balanced_dense(problem, L, cfg, 'fgw', M=check_features(M, problem), alpha=alpha)


# Unbalanced

def kl_divergence(mu: np.ndarray, nu: np.ndarray) -> float:

    """Generalized KL: sum mu log(mu / nu) - mu + nu."""

    return float(np.sum(rel_entr(mu, nu)) - np.sum(mu) + np.sum(nu))


def kl_tensor(mu: np.ndarray, nu: np.ndarray) -> float:

    """Generalized KL between product measures mu x mu and nu x nu."""

    m_mu, m_nu = float(np.sum(mu)), float(np.sum(nu))
    return 2 * m_mu * float(np.sum(rel_entr(mu, nu))) - m_mu ** 2 + m_nu ** 2


def marginal_penalty(T, a: np.ndarray, b: np.ndarray, lam: float) -> float:

    """E(T) = lam * (<log(T 1 / a), T 1> + <log(T^T 1 / b), T^T 1>), added to every cost entry."""

    p, q = plan_marginals(T)
    return lam * float(np.sum(rel_entr(p, a)) + np.sum(rel_entr(q, b)))


def ugw_objective(gw_term: float, T, a: np.ndarray, b: np.ndarray, lam: float) -> float:

    """<L x T, T> + lam KL(T 1 x T 1 | a x a) + lam KL(T^T 1 x T^T 1 | b x b)."""

    p, q = plan_marginals(T)
    return gw_term + lam * kl_tensor(p, a) + lam * kl_tensor(q, b)


def rescale_mass(T_prev_mass: float, T_new):

    """Multiply T_new by sqrt(m(T_prev) / m(T_new))."""

    m_new = plan_mass(T_new)
    if not (np.isfinite(m_new) and m_new > 0):
        raise MassCollapse('Plan mass collapsed to %r.' % m_new)
    factor = np.sqrt(T_prev_mass / m_new)
    if isinstance(T_new, SparseMatrix):
        return T_new.with_values(T_new.values * factor)
    return T_new * factor


def solve_ugw_dense(problem: GWProblem, L: GroundCost, lam: float, cfg: SolverConfig) -> GwResult:

    """
    Dense unbalanced GW (EUGW with the entropic regularizer, PGA-UGW with the proximal one).

    Each round uses the unbalanced cost L x T + E(T), the mass-scaled
    eps_bar = eps m(T) and lam_bar = lam m(T), unbalanced Sinkhorn and a
    mass rescaling by sqrt(m(T_r) / m(T_{r+1})).

    Parameters
    ----------
    problem : GWProblem
        Instance (distributions of any positive mass).
    L : GroundCost
        Ground cost.
    lam : float
        Marginal relaxation, > 0.
    cfg : SolverConfig
        Solver parameters.

    Returns
    -------
    GwResult
        distance = UGW objective at T_R.

    """

    if not (lam is not None and np.isfinite(lam) and lam > 0):
        raise InvalidRegularizer('lambda must be a positive number, got %r.' % lam)
    method = 'pga-ugw' if cfg.proximal else 'eugw'
    a, b = problem.a.weights, problem.b.weights

    T = np.outer(a, b) / np.sqrt(a.sum() * b.sum())
    objective_trace, time_trace = [], []
    start_time = time.perf_counter()

    for r in range(1, cfg.R + 1):
        mT = plan_mass(T)
        C = _contract(problem, L, T, cfg)
        objective_trace.append(ugw_objective(inner_product(C, T), T, a, b, lam))
        cost = C + marginal_penalty(T, a, b, lam)
        eps_bar, lam_bar = cfg.eps * mT, lam * mT
        K = build_kernel(cost, eps_bar, T if cfg.proximal else None)
        T = rescale_mass(mT, sinkhorn_unbalanced(a, b, K, lam_bar, eps_bar, cfg.H, floor=cfg.floor))
        time_trace.append(time.perf_counter() - start_time)
        report_round(cfg, method, r, objective_trace[-1], T, start_time)

    C = _contract(problem, L, T, cfg)
    distance = ugw_objective(inner_product(C, T), T, a, b, lam)
    objective_trace.append(distance)
    return GwResult(check_objective(distance, method), T, objective_trace, time_trace, method)


def naive_plan_value(problem: GWProblem, L: GroundCost, lam: float = None, M=None, alpha: float = None,
                     size_limit: int = NAIVE_SIZE_LIMIT) -> GwResult:

    """
    Objective of the independent coupling a b^T (a b^T / sqrt(m(a) m(b)) when lam is given).

    Baseline for comparisons; no iterations. Uses the rank-one contraction for decomposable costs.
    """

    a, b = problem.a.weights, problem.b.weights
    scale = 1.0 if lam is None else 1.0 / np.sqrt(a.sum() * b.sum())
    T = scale * np.outer(a, b)
    if L.decomposable:
        C = contract_rank_one(problem.Cx, problem.Cy, L, a, b, scale=scale).values
    else:
        if max(problem.shape) > size_limit:
            warnings.warn('Naive plan value with a non-decomposable cost on %s points is slow.' % max(problem.shape))
        C = contract(problem.Cx, problem.Cy, L, T, allow_large_naive=True).values

    gw_term = inner_product(C, T)
    if lam is not None:
        distance = ugw_objective(gw_term, T, a, b, lam)
    elif M is not None:
        distance = fused_value(gw_term, inner_product(check_features(M, problem), T), 0.6 if alpha is None else alpha)
    else:
        distance = gw_term
    return GwResult(check_objective(distance, 'naive'), T, [distance], [], 'naive')
