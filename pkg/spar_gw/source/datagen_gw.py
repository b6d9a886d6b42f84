import numpy as np
import networkx as nx
from scipy.spatial.distance import cdist, pdist, squareform
from sklearn.datasets import make_moons

from spar_gw.source.core_types_gw import (
    Distribution, RelationMatrix, ValidationError, BALANCED, UNBALANCED)

SPIRAL_OFFSET = np.array([10.0, 10.0])
SPIRAL_ROTATION = np.array([[np.cos(np.pi / 4), -np.sin(np.pi / 4)],
                            [np.sin(np.pi / 4), np.cos(np.pi / 4)]])

BA_EDGES_PER_NODE = 2

# Gaussian mixture components: (mean, covariance)
_SOURCE_COV = 0.6 ** np.abs(np.subtract.outer(np.arange(5), np.arange(5)))
SOURCE_COMPONENTS = [
    (np.zeros(5), _SOURCE_COV),
    (np.ones(5), _SOURCE_COV),
    (np.array([0.0, 2.0, 2.0, 0.0, 0.0]), _SOURCE_COV),
]
TARGET_COMPONENTS = [
    (0.5 * np.ones(10), np.eye(10)),
    (2.0 * np.ones(10), np.eye(10)),
]

FEATURE_DIM = 5
FEATURE_VARIANCE = 10.0


class PointCloud:

    """
    n points in R^d.

    Attributes
    ----------
    points : np.ndarray
        n x d coordinates.

    """

    def __init__(self, points):

        X = np.asarray(points, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValidationError('A point cloud needs at least one point, got shape %s.' % (X.shape,))
        if not np.all(np.isfinite(X)):
            raise ValidationError('Point coordinates must be finite.')
        self.points = X

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def __repr__(self):
        return 'PointCloud(n=%d, d=%d)' % (self.n, self.d)


class GraphSpec:

    """
    Undirected simple graph.

    Attributes
    ----------
    n : int
        Number of nodes.
    edges : list of tuple
        Sorted (u, v) pairs with u < v.
    seed : int
        Generator seed.

    """

    def __init__(self, n: int, edges: list, seed: int):
        self.n = n
        self.edges = sorted((min(u, v), max(u, v)) for u, v in edges if u != v)
        self.seed = seed

    @property
    def adjacency(self) -> RelationMatrix:
        A = np.zeros((self.n, self.n))
        if self.edges:
            idx = np.asarray(self.edges)
            A[idx[:, 0], idx[:, 1]] = 1.0
            A[idx[:, 1], idx[:, 0]] = 1.0
        return RelationMatrix(A)

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.entries.sum(axis=1)

    def __repr__(self):
        return 'GraphSpec(n=%d, edges=%d, seed=%s)' % (self.n, len(self.edges), self.seed)


def _check_n(n: int, minimum: int):
    if int(n) != n or n < minimum:
        raise ValidationError('Need an integer n >= %d, got %r.' % (minimum, n))
    return int(n)


def gen_moon(n: int, seed: int = 0, noise: float = 0.05):

    """
    Two interleaving half circles.

    Source points (cos t, sin t), target points (1 - cos t, 0.5 - sin t) for t spread over [0, pi],
    each perturbed by Gaussian noise with standard deviation `noise`.

    Parameters
    ----------
    n : int
        Points per half circle, >= 2.
    seed : int
        Random seed.
    noise : float
        Noise standard deviation, >= 0.

    Returns
    -------
    source : PointCloud
    target : PointCloud

    """

    n = _check_n(n, 2)
    if noise < 0:
        raise ValidationError('noise must be >= 0, got %r.' % noise)
    X, _ = make_moons(n_samples=(n, n), shuffle=False, noise=noise, random_state=seed)
    return PointCloud(X[:n]), PointCloud(X[n:])


def gen_powerlaw_graph(n: int, seed: int = 0) -> GraphSpec:

    """Barabasi-Albert preferential attachment graph, 2 edges per new node."""

    n = _check_n(n, BA_EDGES_PER_NODE + 1)
    G = nx.barabasi_albert_graph(n, BA_EDGES_PER_NODE, seed=seed)
    return GraphSpec(n, list(G.edges()), seed)


def gen_gaussian_mixture(n: int, seed: int = 0, return_labels: bool = False):

    """
    Source: n points from an equal-weight mixture of three Gaussians in R^5 with covariance 0.6^|i-j|.
    Target: n points from an equal-weight mixture of two identity-covariance Gaussians in R^10.
    """

    n = _check_n(n, 2)
    rng = np.random.default_rng(seed)

    def sample(components):
        labels = rng.integers(0, len(components), size=n)
        out = np.empty((n, components[0][0].size))
        for k, (mean, cov) in enumerate(components):
            idx = np.flatnonzero(labels == k)
            out[idx] = rng.multivariate_normal(mean, cov, size=idx.size)
        return out, labels

    source, source_labels = sample(SOURCE_COMPONENTS)
    target, target_labels = sample(TARGET_COMPONENTS)
    if return_labels:
        return PointCloud(source), PointCloud(target), source_labels, target_labels
    return PointCloud(source), PointCloud(target)


def spiral_points(r: np.ndarray, u: np.ndarray, u_prime: np.ndarray):

    """Source and target spiral coordinates for given draws (r, u, u')."""

    theta = 3 * np.pi * np.sqrt(np.asarray(r, dtype=np.float64))
    source = np.column_stack([-theta * np.cos(theta) + u, theta * np.sin(theta) + u_prime]) - SPIRAL_OFFSET
    target = source @ SPIRAL_ROTATION.T + 2 * SPIRAL_OFFSET
    return source, target


def gen_spiral(n: int, seed: int = 0):

    """Two noisy spirals in R^2, the target a pi/4 rotation of the source shifted by (20, 20)."""

    n = _check_n(n, 2)
    rng = np.random.default_rng(seed)
    r, u, u_prime = rng.random(n), rng.random(n), rng.random(n)
    source, target = spiral_points(r, u, u_prime)
    return PointCloud(source), PointCloud(target)


def gen_gaussian_features(n: int, seed: int = 0, dim: int = FEATURE_DIM):

    """
    Node features for fused problems: source ~ N(0, 10 I), target ~ N(5 1, 10 I).

    Returns
    -------
    X, Y : np.ndarray
        n x dim feature matrices.

    """

    n = _check_n(n, 1)
    rng = np.random.default_rng(seed)
    scale = np.sqrt(FEATURE_VARIANCE)
    X = rng.normal(0.0, scale, size=(n, dim))
    Y = rng.normal(5.0, scale, size=(n, dim))
    return X, Y


def euclidean_relation(points) -> RelationMatrix:

    """Pairwise Euclidean distances."""

    X = points.points if isinstance(points, PointCloud) else PointCloud(points).points
    if X.shape[0] == 1:
        return RelationMatrix(np.zeros((1, 1)))
    return RelationMatrix(squareform(pdist(X)))


def feature_relation(X, Y) -> np.ndarray:

    """m x n feature cost M_ij = ||x_i - y_j||."""

    X = X.points if isinstance(X, PointCloud) else np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = Y.points if isinstance(Y, PointCloud) else np.atleast_2d(np.asarray(Y, dtype=np.float64))
    return cdist(X, Y)


def uniform_distribution(n: int, mode: str = BALANCED) -> Distribution:

    """a_i = 1/n; the unbalanced variant keeps unit mass but is free to lose or gain it."""

    n = _check_n(n, 1)
    return Distribution(np.full(n, 1.0 / n), UNBALANCED if mode == UNBALANCED else BALANCED)


def gaussian_weights(points, bandwidth: float = 1.0, mode: str = BALANCED) -> Distribution:

    """
    Weights from an isotropic Gaussian density centred at the point mean.

    Both variants have unit mass.
    """

    if not bandwidth > 0:
        raise ValidationError('bandwidth must be > 0, got %r.' % bandwidth)
    X = points.points if isinstance(points, PointCloud) else PointCloud(points).points
    sq = np.sum((X - X.mean(axis=0)) ** 2, axis=1)
    w = np.exp(-(sq - sq.min()) / (2 * bandwidth ** 2))
    w = w / w.sum()
    return Distribution(w, UNBALANCED if mode == UNBALANCED else BALANCED)
