import numpy as np
import pytest

from giantwalk.giant import GiantSample, ModelParams, sample_giant, solve_mu
from giantwalk.graph import KERNEL, PATH, TREE, _from_edge_array, build_graph


@pytest.fixture(scope="session")
def giant_1000():
    """One H at n = 10^6, eps = 0.1 (N = 1000), reused across modules."""
    return sample_giant(ModelParams.from_eps(1_000_000, 0.1), 1)


@pytest.fixture(scope="session")
def giant_small():
    return sample_giant(ModelParams.from_eps(100_000, 0.2), 3)


@pytest.fixture
def p3():
    return build_graph([(0, 1), (1, 2)])


@pytest.fixture
def triangle():
    return build_graph([(0, 1), (1, 2), (0, 2)])


def complete(n):
    return build_graph([(i, j) for i in range(n) for j in range(i + 1, n)])


def path_graph(n):
    return build_graph([(i, i + 1) for i in range(n - 1)], vertex_count=n)


def cycle(n):
    return build_graph([(i, (i + 1) % n) for i in range(n)])


def synthetic_sample(kernel_edges, n1, tree_parent, eps, n=1000):
    """GiantSample with kernel ``0..n1-1`` (no subdivisions) and explicit tree parents.

    ``tree_parent`` lists the parents of vertices ``n1, n1+1, ...`` in order;
    parents must precede children.
    """
    kernel_edges = np.asarray(kernel_edges, dtype=np.int64).reshape(-1, 2)
    tp = np.asarray(tree_parent, dtype=np.int64)
    total = n1 + len(tp)
    parent = np.concatenate([np.full(n1, -1, dtype=np.int64), tp])
    depth = np.zeros(total, dtype=np.int64)
    root = np.arange(total, dtype=np.int64)
    for v in range(n1, total):
        depth[v] = depth[parent[v]] + 1
        root[v] = root[parent[v]]
    tree_edges = np.column_stack([tp, np.arange(n1, total)]) if len(tp) else np.empty((0, 2), np.int64)
    roles = np.concatenate([np.full(n1, KERNEL, np.int8), np.full(len(tp), TREE, np.int8)])
    g = _from_edge_array(total, np.concatenate([kernel_edges, tree_edges]), roles)
    params = ModelParams(n, eps, solve_mu(eps))
    e = np.sort(kernel_edges, axis=1)
    e = e[np.lexsort((e[:, 1], e[:, 0]))]
    return GiantSample(g, params, None, n1, n1, e, np.ones(len(e), np.int64),
                       np.zeros(len(e) + 1, np.int64), parent, depth, root, {})


K4_EDGES = [(i, j) for i in range(4) for j in range(i + 1, 4)]


@pytest.fixture
def path_tree_sample():
    """K4 with a bare path of depth 4 hanging at vertex 0; eps = 0.6 so kappa = 2."""
    return synthetic_sample(K4_EDGES, 4, [0, 4, 5, 6], 0.6)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
