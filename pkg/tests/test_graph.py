import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from giantwalk.errors import (
    DanglingVertexId, Disconnected, DuplicateEdge, EmptySourceSet, GraphFormatError, SelfLoop,
)
from giantwalk.graph import (
    bfs_distances, build_graph, diameter_exact, dumps_graph, eccentricity, is_connected,
    loads_graph, random_connected_graph, read_graph, write_graph,
)

from conftest import cycle, path_graph


def test_basic_accessors(triangle):
    assert triangle.vertex_count == 3
    assert triangle.edge_count == 3
    assert triangle.degrees.tolist() == [2, 2, 2]
    assert triangle.neighbors(0).tolist() == [1, 2]
    assert triangle.edges().tolist() == [[0, 1], [0, 2], [1, 2]]
    assert triangle.role_of(0) == "kernel"


def test_roles_and_counts():
    g = build_graph([(0, 1), (1, 2)], roles=["kernel", "path", "tree"])
    assert g.role_counts() == {"kernel": 1, "path": 1, "tree": 1}
    assert g.role_of(2) == "tree"


@pytest.mark.parametrize("edges, exc", [
    ([(0, 0)], SelfLoop),
    ([(0, 1), (1, 0)], DuplicateEdge),
    ([(0, 1), (0, 1)], DuplicateEdge),
    ([(0, 5)], DanglingVertexId),
])
def test_validation(edges, exc):
    with pytest.raises(exc):
        build_graph(edges, vertex_count=3)


def test_immutable(triangle):
    with pytest.raises(ValueError):
        triangle.indices[0] = 2


def test_bfs_on_path():
    g = path_graph(6)
    f = bfs_distances(g, [0])
    assert f.dist.tolist() == [0, 1, 2, 3, 4, 5]
    assert f.max_distance == 5
    assert f.level(2).tolist() == [2]
    multi = bfs_distances(g, [0, 5])
    assert multi.dist.tolist() == [0, 1, 2, 2, 1, 0]


def test_bfs_unreached_and_empty():
    g = build_graph([(0, 1)], vertex_count=3)
    f = bfs_distances(g, [0])
    assert f.dist[2] == -1
    assert not f.reachable[2]
    assert not is_connected(g)
    with pytest.raises(EmptySourceSet):
        bfs_distances(g, [])


def test_diameter_small_cases():
    assert diameter_exact(path_graph(10)).value == 9
    assert diameter_exact(cycle(9)).value == 4
    assert eccentricity(cycle(9), 0) == 4
    with pytest.raises(Disconnected):
        diameter_exact(build_graph([(0, 1)], vertex_count=3))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.integers(0, 80), st.integers(0, 2**32 - 1))
def test_diameter_matches_networkx(n, extra, seed):
    g = random_connected_graph(n, extra, np.random.default_rng(seed))
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(g.edges().tolist())
    res = diameter_exact(g)
    assert res.mode == "exact"
    assert res.value == nx.diameter(G)


def test_diameter_sampled_mode_is_a_lower_bound():
    g = random_connected_graph(300, 50, np.random.default_rng(1))
    exact = diameter_exact(g).value
    approx = diameter_exact(g, exact_limit=10, rng=np.random.default_rng(2))
    assert approx.mode == "sampled"
    assert approx.value <= exact


def test_subgraph(triangle):
    sub = triangle.subgraph(np.array([0, 1]))
    assert sub.vertex_count == 2 and sub.edge_count == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(0, 60), st.integers(0, 2**32 - 1))
def test_text_roundtrip_bit_exact(n, extra, seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(n, extra, rng)
    roles = rng.integers(0, 3, size=n).astype(np.int8)
    g = build_graph(g.edges(), roles=roles)
    text = dumps_graph(g)
    h = loads_graph(text)
    assert h == g
    assert dumps_graph(h) == text


def test_file_roundtrip(tmp_path, giant_small):
    p = tmp_path / "h.graph"
    write_graph(giant_small.graph, p)
    assert read_graph(p) == giant_small.graph
    first = p.read_text().splitlines()[0]
    assert first.startswith("#giantwalk-graph v1 n=")


@pytest.mark.parametrize("text", [
    "",
    "#giantwalk-graph v2 n=1 m=0\nV 0 kernel\n",
    "#giantwalk-graph v1 n=2 m=1\nV 0 kernel\nV 1 kernel\nE 0 1\nE 0 1\n",
    "#giantwalk-graph v1 n=2 m=1\nV 0 kernel\nV 1 wizard\nE 0 1\n",
    "#giantwalk-graph v1 n=2 m=2\nV 0 kernel\nV 1 kernel\nE 0 1\n",
])
def test_malformed_text(text):
    with pytest.raises((GraphFormatError, DuplicateEdge)):
        loads_graph(text)
