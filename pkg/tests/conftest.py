import numpy as np
import pytest

from occafs.model import ProblemData, assemble_problem, default_eps0


def random_stiefel(rng, n, k):
    Q, R = np.linalg.qr(rng.standard_normal((n, k)))
    return Q * np.sign(np.diag(R))


def random_labels(rng, p, k):
    """Labels with every class present."""
    lab = np.concatenate([np.arange(1, k + 1), rng.integers(1, k + 1, p - k)])
    return rng.permutation(lab)


def random_problem(rng, n, k, alpha=0.1, p=None, eps0=None):
    """OCCA21 instance assembled from Gaussian data (full-rank A)."""
    p = p or 3 * n
    X = rng.standard_normal((n, p))
    return assemble_problem(X, random_labels(rng, p, k), alpha=alpha,
                            eps0=eps0)


def random_direct_problem(rng, n, k, alpha=0.1, eps0=None):
    """Instance with a random SPD A and unstructured D (full-rank D)."""
    G = rng.standard_normal((n, n))
    A = G @ G.T / n + 0.1 * np.eye(n)
    D = rng.standard_normal((n, k))
    eps0 = default_eps0(n, k) if eps0 is None else eps0
    return ProblemData(A, D, alpha, eps0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
