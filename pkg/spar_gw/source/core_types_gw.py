import numpy as np
import scipy.sparse as sp
from typing import Callable, Tuple, Union


# Errors

class GWError(Exception):
    """Base class of every error raised by spar_gw."""


class ValidationError(GWError, ValueError):
    """Input does not satisfy the invariants of a domain type."""


class DimensionMismatch(ValidationError):
    pass


class NonSymmetricRelation(ValidationError):
    pass


class NegativeWeight(ValidationError):
    pass


class EmptyDistribution(ValidationError):
    pass


class DomainError(ValidationError):
    """Ground cost evaluated outside of its domain (e.g. KL with non-positive arguments)."""


class MissingDecomposition(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class InvalidRegularizer(ValidationError):
    pass


class InvalidGamma(ValidationError):
    pass


class NumericalError(GWError, ArithmeticError):
    """Iterations broke down numerically."""


class InfeasibleKernel(NumericalError):
    """A row or column with positive mass has no positive kernel entry."""


class NumericalUnderflow(NumericalError):
    pass


class NonFiniteObjective(NumericalError):
    pass


class MassCollapse(NumericalError):
    pass


BALANCED = 'balanced'
UNBALANCED = 'unbalanced'

BALANCED_SUM_TOL = 1e-12
SYMMETRY_TOL = 1e-9


def _frozen(arr: np.ndarray):

    """Return a read-only float64 copy of arr."""

    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


class Distribution:

    """
    Marginal weight vector of one mm-space.

    Attributes
    ----------
    weights : np.ndarray
        Non-negative weights, read-only.
    mode : str
        'balanced' (weights on the simplex) or 'unbalanced' (any positive total mass).

    """

    def __init__(self, weights, mode: str = BALANCED):

        """
        Constructor method

        Parameters
        ----------
        weights : array-like
            Weight vector of length n.
        mode : str
            'balanced' or 'unbalanced'.

        """

        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1:
            raise DimensionMismatch('Distribution weights must be a vector, got shape %s' % (w.shape,))
        if w.size == 0:
            raise EmptyDistribution('Distribution has no atoms.')
        if not np.all(np.isfinite(w)):
            raise ValidationError('Distribution weights must be finite.')
        if np.any(w < 0):
            raise NegativeWeight('Negative weight at index %d.' % int(np.argmax(w < 0)))
        if not np.any(w > 0):
            raise EmptyDistribution('All weights are zero.')
        if mode not in (BALANCED, UNBALANCED):
            raise ValidationError('Unknown distribution mode: %r' % mode)
        if mode == BALANCED and abs(w.sum() - 1.0) > BALANCED_SUM_TOL:
            raise ValidationError('Balanced weights must sum to 1, got %.17g.' % w.sum())

        self.weights = _frozen(w)
        self.mode = mode

    @property
    def n(self):
        return self.weights.size

    @property
    def mass(self):
        return float(self.weights.sum())

    @property
    def balanced(self):
        return self.mode == BALANCED

    def __len__(self):
        return self.n

    def __repr__(self):
        return 'Distribution(n=%d, mode=%s, mass=%.6g)' % (self.n, self.mode, self.mass)


class RelationMatrix:

    """
    Symmetric n x n structure matrix (pairwise distances, kernel values or adjacency).

    Attributes
    ----------
    entries : np.ndarray
        The matrix, read-only.

    """

    def __init__(self, entries):

        C = np.asarray(entries, dtype=np.float64)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise DimensionMismatch('Relation matrix must be square, got shape %s.' % (C.shape,))
        if C.shape[0] == 0:
            raise DimensionMismatch('Relation matrix is empty.')
        if not np.all(np.isfinite(C)):
            raise ValidationError('Relation matrix has non-finite entries.')
        asym = np.abs(C - C.T)
        if asym.max() > SYMMETRY_TOL:
            i, j = np.unravel_index(np.argmax(asym), asym.shape)
            raise NonSymmetricRelation('Relation matrix is not symmetric: C[%d,%d]=%g, C[%d,%d]=%g.' % (i, j, C[i, j], j, i, C[j, i]))

        self.entries = _frozen(C)

    @property
    def n(self):
        return self.entries.shape[0]

    def __repr__(self):
        return 'RelationMatrix(n=%d)' % self.n


def as_array(x) -> np.ndarray:

    """Plain float64 array out of a RelationMatrix, Distribution or array-like."""

    if isinstance(x, RelationMatrix):
        return x.entries
    if isinstance(x, Distribution):
        return x.weights
    return np.asarray(x, dtype=np.float64)


# Ground costs

def _l1(a, b):
    return np.abs(a - b)


def _l2(a, b):
    return (a - b) ** 2


def _kl(a, b):
    return a * np.log(a / b) - a + b


def _check_kl_domain(a, b):
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
        raise DomainError('KL ground cost requires strictly positive arguments.')


class GroundCost:

    """
    Scalar loss L(a, b) comparing one relation entry of each space.

    Attributes
    ----------
    kind : str
        'l1', 'l2', 'kl' or 'custom'.
    func : callable
        Vectorized L(a, b).
    decomposition : tuple of 4 callables or None
        (f1, f2, h1, h2) with L(a, b) = f1(a) + f2(b) - h1(a) * h2(b).

    """

    def __init__(self, kind: str, func: Callable = None, decomposition: Tuple[Callable, Callable, Callable, Callable] = None):

        if kind == 'l1':
            func = _l1
        elif kind == 'l2':
            func = _l2
            if decomposition is None:
                decomposition = (np.square, np.square, lambda a: a, lambda b: 2 * b)
        elif kind == 'kl':
            func = _kl
            if decomposition is None:
                decomposition = (lambda a: a * np.log(a) - a, lambda b: b, lambda a: a, np.log)
        elif kind == 'custom':
            if func is None:
                raise ValidationError('A custom ground cost needs a function.')
        else:
            raise ValidationError('Unknown ground cost kind: %r' % kind)

        if decomposition is not None and len(decomposition) != 4:
            raise ValidationError('A decomposition is a quadruple (f1, f2, h1, h2).')

        self.kind = kind
        self.func = func
        self.decomposition = decomposition

    @property
    def decomposable(self):
        return self.decomposition is not None

    def check_domain(self, a, b):

        """Raise DomainError if (a, b) lies outside the cost's domain."""

        if self.kind == 'kl':
            _check_kl_domain(a, b)

    def __call__(self, a, b):

        """Vectorized evaluation with numpy broadcasting; no domain check."""

        return self.func(a, b)

    def __repr__(self):
        return 'GroundCost(%s%s)' % (self.kind, ', decomposable' if self.decomposable else '')


L1_COST = GroundCost('l1')
L2_COST = GroundCost('l2')
KL_COST = GroundCost('kl')


def get_ground_cost(name: Union[str, GroundCost]) -> GroundCost:

    """Look up a built-in ground cost by name ('l1', 'l2', 'kl')."""

    if isinstance(name, GroundCost):
        return name
    costs = {'l1': L1_COST, 'l2': L2_COST, 'kl': KL_COST}
    key = str(name).strip().lower()
    if key not in costs:
        raise ValidationError('Unknown ground cost %r, choose one of: l1, l2, kl.' % name)
    return costs[key]


def eval_cost(L: GroundCost, a: float, b: float) -> float:

    """
    Evaluate the ground cost at a single pair of relation entries.

    Parameters
    ----------
    L : GroundCost
        The ground cost.
    a : float
        Entry of the source relation matrix.
    b : float
        Entry of the target relation matrix.

    Returns
    -------
    float
        L(a, b).

    """

    L.check_domain(a, b)
    return float(L(np.float64(a), np.float64(b)))


# Sparse storage shared by coupling plans, kernels and sparse cost matrices

class SparseMatrix:

    """
    Matrix stored as values over a set of distinct (row, col) keys, sorted row-major.

    Stored values may be zero; the key set is the structure, not the value pattern.

    Attributes
    ----------
    rows, cols : np.ndarray of int64
        Keys.
    values : np.ndarray of float64
        One value per key.
    shape : tuple
        (m, n).

    """

    def __init__(self, rows, cols, values, shape: Tuple[int, int], sort: bool = True):

        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        m, n = int(shape[0]), int(shape[1])

        if not (rows.size == cols.size == values.size):
            raise DimensionMismatch('rows, cols and values must have equal length.')
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise IndexOutOfRange('Sparse key outside of shape (%d, %d).' % (m, n))

        keys = rows * n + cols
        if sort:
            order = np.argsort(keys, kind='stable')
            rows, cols, values, keys = rows[order], cols[order], values[order], keys[order]
        if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
            raise ValidationError('Sparse matrix has duplicate (i, j) keys.')

        self.rows = rows
        self.cols = cols
        self.values = values
        self.shape = (m, n)

    @property
    def nnz(self):
        return self.values.size

    @property
    def keys(self):
        return self.rows * self.shape[1] + self.cols

    def with_values(self, values):

        """Same key set, new values."""

        out = SparseMatrix.__new__(SparseMatrix)
        out.rows, out.cols, out.shape = self.rows, self.cols, self.shape
        out.values = np.asarray(values, dtype=np.float64).ravel()
        if out.values.size != self.rows.size:
            raise DimensionMismatch('New values do not match the key set.')
        return out

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        dense[self.rows, self.cols] = self.values
        return dense

    def to_scipy(self) -> sp.coo_matrix:
        return sp.coo_matrix((self.values, (self.rows, self.cols)), shape=self.shape)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return np.bincount(self.rows, weights=self.values * v[self.cols], minlength=self.shape[0])

    def rmatvec(self, u: np.ndarray) -> np.ndarray:
        return np.bincount(self.cols, weights=self.values * u[self.rows], minlength=self.shape[1])

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.values, minlength=self.shape[0])

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.values, minlength=self.shape[1])

    def total(self) -> float:
        return float(self.values.sum())

    @classmethod
    def from_dense(cls, dense: np.ndarray, mask: np.ndarray = None):

        """Keys are the nonzero entries of dense (or the True entries of mask)."""

        dense = np.asarray(dense, dtype=np.float64)
        if mask is None:
            mask = dense != 0
        rows, cols = np.nonzero(mask)
        return cls(rows, cols, dense[rows, cols], dense.shape, sort=False)

    def __repr__(self):
        return 'SparseMatrix(shape=%s, nnz=%d)' % (self.shape, self.nnz)


# A coupling plan or kernel is either a dense array or a SparseMatrix.
CouplingPlan = Union[np.ndarray, SparseMatrix]
KernelMatrix = Union[np.ndarray, SparseMatrix]


def validate_plan(T: CouplingPlan, name: str = 'plan') -> CouplingPlan:

    """Check the CouplingPlan / KernelMatrix invariants: stored values finite and >= 0."""

    values = T.values if isinstance(T, SparseMatrix) else np.asarray(T)
    if not np.all(np.isfinite(values)):
        raise NumericalUnderflow('%s has non-finite entries.' % name)
    if np.any(values < 0):
        raise ValidationError('%s has negative entries.' % name)
    return T


def plan_mass(T: CouplingPlan) -> float:
    return T.total() if isinstance(T, SparseMatrix) else float(np.sum(T))


def plan_marginals(T: CouplingPlan):

    """Row and column sums (T 1, T^T 1)."""

    if isinstance(T, SparseMatrix):
        return T.row_sums(), T.col_sums()
    return T.sum(axis=1), T.sum(axis=0)


def marginal_residual(T: CouplingPlan, a, b) -> float:

    """max(||T 1 - a||_inf, ||T^T 1 - b||_inf)."""

    p, q = plan_marginals(T)
    return float(max(np.abs(p - as_array(a)).max(), np.abs(q - as_array(b)).max()))


class GWProblem:

    """
    A checked problem instance: two distributions and two relation matrices.

    """

    def __init__(self, a: Distribution, b: Distribution, Cx: RelationMatrix, Cy: RelationMatrix):
        self.a = a
        self.b = b
        self.Cx = Cx
        self.Cy = Cy

    @property
    def shape(self):
        return (self.a.n, self.b.n)

    @property
    def balanced(self):
        return self.a.balanced

    def __repr__(self):
        return 'GWProblem(m=%d, n=%d, mode=%s)' % (self.a.n, self.b.n, self.a.mode)


def validate_problem(a, b, Cx, Cy, mode: str = None) -> GWProblem:

    """
    Check that two distributions and two relation matrices form a problem instance.

    Raw arrays are accepted and converted; `mode` applies to raw weight vectors
    (default 'balanced').

    Parameters
    ----------
    a, b : Distribution or array-like
        Source and target weights.
    Cx, Cy : RelationMatrix or array-like
        Source and target relation matrices.
    mode : str, optional
        Mode for weight vectors given as raw arrays.

    Returns
    -------
    GWProblem
        The instance, unchanged.

    """

    if not isinstance(a, Distribution):
        a = Distribution(a, mode or BALANCED)
    if not isinstance(b, Distribution):
        b = Distribution(b, mode or BALANCED)
    if not isinstance(Cx, RelationMatrix):
        Cx = RelationMatrix(Cx)
    if not isinstance(Cy, RelationMatrix):
        Cy = RelationMatrix(Cy)

    if a.n != Cx.n:
        raise DimensionMismatch('dim(a)=%d but Cx is %dx%d.' % (a.n, Cx.n, Cx.n))
    if b.n != Cy.n:
        raise DimensionMismatch('dim(b)=%d but Cy is %dx%d.' % (b.n, Cy.n, Cy.n))
    if a.mode != b.mode:
        raise ValidationError('Both distributions must be balanced or both unbalanced (got %s and %s).' % (a.mode, b.mode))

    return GWProblem(a, b, Cx, Cy)
