import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from spar_gw.source.core_types_gw import RelationMatrix, ValidationError, BALANCED, UNBALANCED
from spar_gw.source.datagen_gw import (
    gen_moon, gen_powerlaw_graph, gen_gaussian_mixture, gen_spiral, spiral_points, gen_gaussian_features,
    euclidean_relation, feature_relation, uniform_distribution, gaussian_weights, PointCloud, SPIRAL_ROTATION)


def _tail_slope(degrees, k_min=5):
    """Least-squares slope of the log-binned degree density for degrees >= k_min."""
    edges = k_min * 2.0 ** np.arange(0, 10)
    counts, _ = np.histogram(degrees, bins=edges)
    keep = counts >= 5
    centers = np.sqrt(edges[:-1] * edges[1:])[keep]
    density = counts[keep] / np.diff(edges)[keep]
    return np.polyfit(np.log(centers), np.log(density), 1)[0]


def test_moon_noiseless_points_lie_on_half_circles():
    source, target = gen_moon(4, seed=0, noise=0.0)
    x, y = source.points.T
    assert_allclose(x ** 2 + y ** 2, 1.0, atol=1e-12)
    assert np.all(y >= -1e-12)
    x, y = target.points.T
    assert_allclose((x - 1) ** 2 + (y - 0.5) ** 2, 1.0, atol=1e-12)
    assert np.all(y <= 0.5 + 1e-12)


def test_moon_shape_and_bounds():
    noise = 0.05
    source, target = gen_moon(200, seed=1, noise=noise)
    assert source.points.shape == (200, 2) and target.points.shape == (200, 2)
    pad = 6 * noise
    assert np.all((source.points[:, 0] >= -1 - pad) & (source.points[:, 0] <= 1 + pad))
    assert np.all((source.points[:, 1] >= -pad) & (source.points[:, 1] <= 1 + pad))
    assert np.all((target.points[:, 0] >= -pad) & (target.points[:, 0] <= 2 + pad))
    assert np.all((target.points[:, 1] >= -0.5 - pad) & (target.points[:, 1] <= 0.5 + pad))


def test_moon_determinism():
    assert_array_equal(gen_moon(30, seed=5)[0].points, gen_moon(30, seed=5)[0].points)
    with pytest.raises(ValidationError):
        gen_moon(20, noise=-1.0)


def test_graph_adjacency():
    graph = gen_powerlaw_graph(50, seed=3)
    A = graph.adjacency.entries
    assert_array_equal(A, A.T)
    assert_array_equal(np.diag(A), 0)
    assert_array_equal(A.sum(axis=1), graph.degrees)
    assert graph.edges == gen_powerlaw_graph(50, seed=3).edges


def test_graph_degree_tail():
    degrees = np.concatenate([gen_powerlaw_graph(500, seed=k).degrees for k in range(10)])
    assert -3.5 <= _tail_slope(degrees) <= -1.5


def test_gaussian_mixture_shapes_and_determinism():
    source, target = gen_gaussian_mixture(40, seed=2)
    assert source.points.shape == (40, 5)
    assert target.points.shape == (40, 10)
    assert_array_equal(source.points, gen_gaussian_mixture(40, seed=2)[0].points)


def test_gaussian_mixture_source_covariance():
    source, _, labels, _ = gen_gaussian_mixture(300000, seed=4, return_labels=True)
    X = source.points[labels == 0]
    cov = np.cov(X, rowvar=False)
    sigma = np.sqrt((1 + 0.6 ** 2) / X.shape[0])
    assert abs(cov[0, 1] - 0.6) <= 3 * sigma
    assert abs(cov[0, 2] - 0.36) <= 3 * np.sqrt((1 + 0.36 ** 2) / X.shape[0])


def test_spiral_formula():
    source, target = spiral_points(np.array([1.0]), np.array([0.0]), np.array([0.0]))
    assert_allclose(source[0], [3 * np.pi - 10, -10], atol=1e-12)
    assert_allclose(target[0], SPIRAL_ROTATION @ source[0] + 20, atol=1e-12)


def test_spiral_target_is_rotated_source():
    source, target = gen_spiral(25, seed=6)
    assert_allclose(target.points, source.points @ SPIRAL_ROTATION.T + 20, atol=1e-12)
    assert_array_equal(source.points, gen_spiral(25, seed=6)[0].points)


def test_gaussian_features():
    X, Y = gen_gaussian_features(20000, seed=7)
    assert X.shape == (20000, 5)
    assert abs(X.mean()) < 0.1
    assert abs(Y.mean() - 5.0) < 0.1
    assert X.var() == pytest.approx(10.0, rel=0.05)


def test_euclidean_relation():
    assert_allclose(euclidean_relation(np.array([[0.0, 0.0], [3.0, 4.0]])).entries, [[0, 5], [5, 0]])
    assert_allclose(euclidean_relation(np.array([[1.0, 2.0]])).entries, [[0.0]])
    X = np.random.default_rng(8).random((5, 3))
    expected = np.array([[np.sqrt(np.sum((X[i] - X[j]) ** 2)) for j in range(5)] for i in range(5)])
    assert_allclose(euclidean_relation(PointCloud(X)).entries, expected, atol=1e-12)


def test_feature_relation():
    M = feature_relation(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0], [0.0, 1.0]]))
    assert_allclose(M, [[5.0, 1.0]])


@pytest.mark.parametrize('mode', [BALANCED, UNBALANCED])
def test_weight_builders(mode):
    mu = uniform_distribution(8, mode)
    assert mu.mode == mode
    assert mu.mass == pytest.approx(1.0)
    points = gen_moon(10, seed=0)[0]
    nu = gaussian_weights(points, bandwidth=0.5, mode=mode)
    assert nu.mass == pytest.approx(1.0)
    assert np.all(nu.weights > 0)
    center = np.argmin(np.sum((points.points - points.points.mean(axis=0)) ** 2, axis=1))
    assert np.argmax(nu.weights) == center


@pytest.mark.parametrize('seed', range(5))
def test_euclidean_relation_triangle_inequality(seed):
    X = np.random.default_rng(seed).normal(size=(20, 3)) * 10 ** seed
    D = euclidean_relation(X).entries
    # D[i, k] <= D[i, j] + D[j, k] for every (i, j, k)
    slack = D[:, :, None] + D[None, :, :] - D[:, None, :]
    assert slack.min() >= -1e-9 * max(1.0, D.max())


@pytest.mark.parametrize('generator', [gen_moon, gen_gaussian_mixture, gen_spiral])
def test_point_cloud_relations_are_valid(generator):
    for cloud in generator(12, seed=3):
        C = euclidean_relation(cloud).entries
        assert isinstance(RelationMatrix(C), RelationMatrix)
        assert_array_equal(np.diag(C), 0.0)
        assert C.min() >= 0


def test_graph_relation_is_valid():
    C = gen_powerlaw_graph(30, seed=4).adjacency.entries
    assert isinstance(RelationMatrix(C), RelationMatrix)
    assert set(np.unique(C)) <= {0.0, 1.0}
    assert_array_equal(np.diag(C), 0.0)
