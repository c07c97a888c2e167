import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from giantwalk.errors import Disconnected, TooLarge
from giantwalk.graph import bfs_distances, build_graph, is_connected, random_connected_graph
from giantwalk.resistance import (
    LaplacianFactor, commute_identity_check, effective_resistance, hitting_times_exact,
    laplacian, max_resistance_estimate, resistance_matrix_pinv, resistance_solve,
)

from conftest import complete, path_graph


def test_laplacian_rows_sum_to_zero(giant_small):
    L = laplacian(giant_small.graph)
    assert np.abs(np.asarray(L.sum(axis=1))).max() == 0
    assert (L != L.T).nnz == 0


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_small_examples(p3, triangle, method):
    assert effective_resistance(p3, 0, 2, method=method) == pytest.approx(2, abs=1e-9)
    assert effective_resistance(triangle, 0, 1, method=method) == pytest.approx(2 / 3, abs=1e-9)
    for n in (4, 7):
        assert effective_resistance(complete(n), 1, 3, method=method) == pytest.approx(2 / n, abs=1e-9)
    assert effective_resistance(build_graph([(0, 1)]), 0, 1, method=method) == pytest.approx(1)
    assert effective_resistance(p3, 1, 1) == 0


def test_disconnected():
    g = build_graph([(0, 1), (2, 3)])
    with pytest.raises(Disconnected):
        effective_resistance(g, 0, 3)
    with pytest.raises(Disconnected):
        hitting_times_exact(g, 0)


def test_hitting_times_examples(p3, triangle):
    h = hitting_times_exact(p3, 2)
    assert h.tolist() == pytest.approx([4, 3, 0], abs=1e-12)
    assert hitting_times_exact(triangle, 0).tolist() == pytest.approx([0, 2, 2], abs=1e-12)


def test_hitting_times_too_large():
    with pytest.raises(TooLarge):
        hitting_times_exact(path_graph(10_001), 0)


def test_commute_examples(p3, triangle):
    c = commute_identity_check(p3, 0, 2)
    assert c.commute_time == pytest.approx(8)
    assert c.residual < 1e-12 and c.ok
    assert c.literal_residual == pytest.approx(1.0)
    assert commute_identity_check(triangle, 0, 1).commute_time == pytest.approx(4)
    lit = commute_identity_check(p3, 0, 2, convention="literal")
    assert not lit.ok and lit.residual == pytest.approx(1.0)


def test_commute_on_fifty_random_graphs():
    rng = np.random.default_rng(17)
    for _ in range(50):
        n = int(rng.integers(2, 51))
        g = random_connected_graph(n, int(rng.integers(0, 2 * n)), rng)
        v, w = rng.choice(n, size=2, replace=False)
        assert commute_identity_check(g, int(v), int(w)).residual < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(0, 40), st.integers(0, 2**32 - 1))
def test_metric_and_distance_bound(n, extra, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(n, extra, rng)
    R = resistance_matrix_pinv(g)
    assert np.allclose(R, R.T, atol=1e-9)
    assert np.allclose(np.diag(R), 0, atol=1e-9)
    # triangle inequality over all triples
    assert (R[:, None, :] <= R[:, :, None] + R[None, :, :] + 1e-9).all()
    for v in range(n):
        d = bfs_distances(g, [v]).dist
        assert (R[v] <= d + 1e-9).all()
    fac = LaplacianFactor(g, int(rng.integers(n)))
    pairs = rng.integers(0, n, size=(10, 2))
    assert np.allclose(fac.resistances(pairs), R[pairs[:, 0], pairs[:, 1]], atol=1e-9)


def test_rayleigh_monotonicity():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(5, 30))
        g = random_connected_graph(n, n, rng)
        R = resistance_matrix_pinv(g)
        edges = g.edges()
        for k in rng.permutation(len(edges)):
            keep = np.delete(edges, k, axis=0)
            h = build_graph(keep, vertex_count=n)
            if is_connected(h):
                break
        else:
            continue
        R2 = resistance_matrix_pinv(h)
        assert (R2 >= R - 1e-9).all()


def test_direct_iterative_agree():
    rng = np.random.default_rng(8)
    g = random_connected_graph(1500, 600, rng)
    for _ in range(5):
        v, w = rng.choice(1500, size=2, replace=False)
        a = resistance_solve(g, v, w, method="direct")
        b = resistance_solve(g, v, w, method="iterative")
        assert abs(a.value - b.value) <= 1e-7 * a.value
        assert a.residual < 1e-8 and b.method == "iterative"


def test_factor_matches_solver(giant_small):
    g = giant_small.graph
    fac = LaplacianFactor(g, 0)
    rng = np.random.default_rng(1)
    pairs = rng.integers(0, g.vertex_count, size=(4, 2))
    got = fac.resistances(pairs)
    for (v, w), r in zip(pairs, got):
        assert r == pytest.approx(effective_resistance(g, v, w), rel=1e-7, abs=1e-9)


def test_max_resistance_estimate(giant_1000):
    est = max_resistance_estimate(giant_1000, 40, np.random.default_rng(0))
    assert est.distance_violations == 0
    assert est.k2_scaled <= 20
    assert est.pairs_checked == 2 * 41
    assert est.h_max >= est.k2_max * 0.5
