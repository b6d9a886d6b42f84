import numpy as np
import pytest
from scipy.spatial.distance import cdist

from spar_gw.source.core_types_gw import validate_problem, UNBALANCED


def point_relation(n, seed, d=2):
    X = np.random.default_rng(seed).random((n, d))
    return cdist(X, X)


def uniform(n):
    return np.full(n, 1.0 / n)


def random_simplex(n, seed):
    w = np.random.default_rng(seed).random(n) + 0.5
    return w / w.sum()


def brute_force_contraction(Cx, Cy, L, T):
    m, n = T.shape
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for k in range(m):
                for l in range(n):
                    out[i, j] += L(Cx[i, k], Cy[j, l]) * T[k, l]
    return out


@pytest.fixture
def small_problem():
    """Balanced 6 x 5 point-cloud instance with non-uniform weights."""
    return validate_problem(random_simplex(6, 1), random_simplex(5, 2), point_relation(6, 3), point_relation(5, 4))


@pytest.fixture
def unbalanced_problem():
    a = 1.2 * random_simplex(5, 5)
    b = 0.8 * random_simplex(4, 6)
    return validate_problem(a, b, point_relation(5, 7), point_relation(4, 8), mode=UNBALANCED)


@pytest.fixture
def no_threads(monkeypatch):
    monkeypatch.setenv('SPARGW_THREADS', '1')
