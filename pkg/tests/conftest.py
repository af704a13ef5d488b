import numpy as np
import pytest

from sparseoc import mesh as fem
from sparseoc.experiments import build_example1, build_example2
from sparseoc.mesh import DiscreteProblem


@pytest.fixture(scope="session")
def ex1():
    """Cached (mesh, problem, exact fields) per level for the constructed problem."""
    cache = {}

    def get(level):
        if level not in cache:
            cache[level] = build_example1(level)
        return cache[level]

    return get


@pytest.fixture(scope="session")
def ex2():
    cache = {}

    def get(level):
        if level not in cache:
            cache[level] = build_example2(level)
        return cache[level]

    return get


@pytest.fixture(scope="session")
def meshes():
    cache = {}

    def get(level):
        if level not in cache:
            cache[level] = fem.build_mesh(level)
        return cache[level]

    return get


def random_tiny_problem(rng, n=None, alpha=None, beta=None):
    """Small dense-ish DiscreteProblem with valid lumping structure.

    M is SPD with nonnegative entries and W_i = sum_j M_ij, so the graph
    Laplacian argument gives W - M >= 0 as for P1 lumping.  The mass scale
    is kept small against the O(n) stiffness, mirroring the h^2-vs-O(1)
    balance of the FEM operators the solvers are tuned for.
    """
    import scipy.sparse as sp
    n = n if n is not None else rng.integers(1, 5)
    B = rng.uniform(0.0, 1.0, size=(n, n))
    M = 0.5 * (B + B.T) + n * np.eye(n)
    mscale = rng.uniform(0.02, 0.1) / n
    M *= mscale
    W = M.sum(axis=1)
    Q = rng.standard_normal((n, n))
    K = Q @ Q.T + n * np.eye(n)
    # data loud enough that zero, interior and bound regimes all occur
    data = rng.uniform(0.2, 2.0) / mscale
    return DiscreteProblem(
        K=sp.csr_matrix(K), M=sp.csr_matrix(M), W=W,
        yd=data * rng.standard_normal(n), yc=data * rng.standard_normal(n),
        alpha=alpha if alpha is not None else float(rng.uniform(1e-3, 1.0)),
        beta=beta if beta is not None else float(rng.uniform(1e-3, 1.0)),
        a=float(-rng.uniform(0.2, 2.0)), b=float(rng.uniform(0.2, 2.0)),
        h=1.0)
