"""Immutable sparse graphs with vertex roles, BFS distances and diameters.

Vertices are dense integers ``0..n-1`` stored in compressed (CSR) neighbour
lists. Every vertex carries a role tag recording which construction step
produced it: ``kernel`` (degree >= 3 core), ``path`` (subdivision vertex)
or ``tree`` (attached Galton-Watson tree vertex).
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba
import numpy as np

from .errors import (
    DanglingVertexId,
    Disconnected,
    DuplicateEdge,
    EmptySourceSet,
    GraphFormatError,
    SelfLoop,
)

ROLE_NAMES = ("kernel", "path", "tree")
KERNEL, PATH, TREE = 0, 1, 2
_ROLE_CODE = {name: code for code, name in enumerate(ROLE_NAMES)}

UNREACHED = -1

EXACT_DIAMETER_LIMIT = 200_000
SAMPLED_ECCENTRICITIES = 32


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph in CSR form.

    ``indices[indptr[v]:indptr[v+1]]`` are the neighbours of ``v`` in
    increasing order. ``roles`` holds the integer role code of each vertex.
    Use :func:`build_graph` rather than the constructor.
    """

    indptr: np.ndarray
    indices: np.ndarray
    roles: np.ndarray

    @property
    def vertex_count(self) -> int:
        return len(self.indptr) - 1

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def role_of(self, v: int) -> str:
        return ROLE_NAMES[self.roles[v]]

    def role_counts(self) -> dict[str, int]:
        counts = np.bincount(self.roles, minlength=len(ROLE_NAMES))
        return {name: int(c) for name, c in zip(ROLE_NAMES, counts)}

    def edges(self) -> np.ndarray:
        """Edge array of shape ``(m, 2)`` with ``u < v``, sorted."""
        src = np.repeat(np.arange(self.vertex_count), self.degrees)
        keep = src < self.indices
        return np.column_stack([src[keep], self.indices[keep]])

    def subgraph(self, vertices: np.ndarray) -> "Graph":
        """Induced subgraph on ``vertices``; new ids follow the given order."""
        vertices = np.asarray(vertices, dtype=np.int64)
        relabel = np.full(self.vertex_count, -1, dtype=np.int64)
        relabel[vertices] = np.arange(len(vertices))
        e = self.edges()
        e = relabel[e]
        e = e[(e >= 0).all(axis=1)]
        return _from_edge_array(len(vertices), e, self.roles[vertices])

    def to_scipy(self):
        import scipy.sparse as sp

        n = self.vertex_count
        data = np.ones(len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.roles, other.roles)
        )

    __hash__ = None


def _role_array(roles, n: int) -> np.ndarray:
    if roles is None:
        return np.zeros(n, dtype=np.int8)
    arr = np.asarray(roles)
    if arr.dtype.kind in "iu":
        out = arr.astype(np.int8)
    else:
        try:
            out = np.array([_ROLE_CODE[str(r)] for r in arr], dtype=np.int8)
        except KeyError as exc:
            raise ValueError(f"unknown role {exc.args[0]!r}") from None
    if len(out) != n:
        raise ValueError(f"expected {n} roles, got {len(out)}")
    if len(out) and (out.min() < 0 or out.max() >= len(ROLE_NAMES)):
        raise ValueError("role codes must be 0 (kernel), 1 (path) or 2 (tree)")
    return out


def build_graph(
    edges: Iterable[Sequence[int]] | np.ndarray,
    roles: Sequence | np.ndarray | None = None,
    vertex_count: int | None = None,
) -> Graph:
    """Build a :class:`Graph` from an edge list.

    ``vertex_count`` defaults to ``len(roles)``. Raises :class:`SelfLoop`,
    :class:`DuplicateEdge` (including ``(u, v)`` next to ``(v, u)``) and
    :class:`DanglingVertexId` for ids outside ``[0, n)``.
    """
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                   dtype=np.int64).reshape(-1, 2)
    if vertex_count is None:
        if roles is None:
            vertex_count = int(e.max()) + 1 if len(e) else 0
        else:
            vertex_count = len(roles)
    n = int(vertex_count)
    role_arr = _role_array(roles, n)
    if len(e):
        if e.min() < 0 or e.max() >= n:
            bad = e[(e < 0) | (e >= n)][0]
            raise DanglingVertexId(f"vertex id {bad} outside [0, {n})")
        loops = e[:, 0] == e[:, 1]
        if loops.any():
            raise SelfLoop(f"self-loop at vertex {e[loops][0, 0]}")
        e = np.sort(e, axis=1)
        key = e[:, 0] * n + e[:, 1]
        uniq, counts = np.unique(key, return_counts=True)
        if (counts > 1).any():
            k = uniq[counts > 1][0]
            raise DuplicateEdge(f"duplicate edge ({k // n}, {k % n})")
    return _from_edge_array(n, e, role_arr)


def random_connected_graph(n: int, extra: int, rng: np.random.Generator) -> Graph:
    """Random recursive tree on ``n`` vertices plus up to ``extra`` further edges."""
    if n < 1:
        raise ValueError("n must be positive")
    tree = [(int(rng.integers(0, v)), v) for v in range(1, n)]
    seen = {(min(a, b), max(a, b)) for a, b in tree}
    for _ in range(extra):
        a, b = (int(x) for x in rng.integers(0, n, size=2))
        if a != b:
            seen.add((min(a, b), max(a, b)))
    return build_graph(sorted(seen), vertex_count=n)


def _from_edge_array(n: int, e: np.ndarray, roles: np.ndarray) -> Graph:
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    indices = dst.astype(np.int64)
    for arr in (indptr, indices, roles):
        arr.flags.writeable = False
    return Graph(indptr, indices, roles)


# --------------------------------------------------------------------------
# breadth-first search

@numba.njit(cache=True)
def _bfs(indptr, indices, sources):
    n = len(indptr) - 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for s in sources:
        if dist[s] == -1:
            dist[s] = 0
            queue[tail] = s
            tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        dv = dist[v] + 1
        for k in range(indptr[v], indptr[v + 1]):
            w = indices[k]
            if dist[w] == -1:
                dist[w] = dv
                queue[tail] = w
                tail += 1
    return dist


@dataclass(frozen=True)
class DistanceField:
    """Hop distances from a source set; unreachable vertices hold ``-1``."""

    sources: np.ndarray
    dist: np.ndarray = field(repr=False)

    @property
    def reachable(self) -> np.ndarray:
        return self.dist != UNREACHED

    @property
    def max_distance(self) -> int:
        return int(self.dist.max()) if len(self.dist) else 0

    def level(self, k: int) -> np.ndarray:
        """Vertices at distance exactly ``k``."""
        return np.flatnonzero(self.dist == k)

    def levels(self) -> list[np.ndarray]:
        d = self.dist[self.reachable]
        ids = np.flatnonzero(self.reachable)
        order = np.argsort(d, kind="stable")
        bounds = np.searchsorted(d[order], np.arange(self.max_distance + 2))
        return [ids[order[bounds[k]:bounds[k + 1]]] for k in range(self.max_distance + 1)]


def bfs_distances(g: Graph, sources) -> DistanceField:
    """Multi-source breadth-first hop distances."""
    src = np.unique(np.atleast_1d(np.asarray(sources, dtype=np.int64)))
    if len(src) == 0:
        raise EmptySourceSet("bfs_distances needs at least one source")
    if src[0] < 0 or src[-1] >= g.vertex_count:
        raise DanglingVertexId(f"source ids must lie in [0, {g.vertex_count})")
    return DistanceField(src, _bfs(g.indptr, g.indices, src))


def is_connected(g: Graph) -> bool:
    if g.vertex_count <= 1:
        return True
    return bool((_bfs(g.indptr, g.indices, np.zeros(1, np.int64)) >= 0).all())


def eccentricity(g: Graph, v: int) -> int:
    d = _bfs(g.indptr, g.indices, np.array([v], dtype=np.int64))
    if (d < 0).any():
        raise Disconnected("graph is disconnected")
    return int(d.max())


@dataclass(frozen=True)
class DiameterResult:
    value: int
    mode: str  # "exact" or "sampled"
    bfs_runs: int

    def __int__(self) -> int:
        return self.value


def diameter_exact(
    g: Graph,
    *,
    exact_limit: int = EXACT_DIAMETER_LIMIT,
    samples: int = SAMPLED_ECCENTRICITIES,
    rng: np.random.Generator | None = None,
) -> DiameterResult:
    """Diameter of a connected graph.

    Up to ``exact_limit`` vertices the value is exact: eccentricity bounds
    from each BFS prune vertices whose eccentricity cannot exceed the
    current lower bound, so far fewer than ``n`` searches are usually run.
    Larger graphs get a double-sweep lower bound improved by ``samples``
    random eccentricities and are labelled ``"sampled"``.
    """
    n = g.vertex_count
    if n == 0:
        raise ValueError("empty graph has no diameter")
    if n == 1:
        return DiameterResult(0, "exact", 0)
    if not is_connected(g):
        raise Disconnected("diameter of a disconnected graph is infinite")
    if n > exact_limit:
        return _sampled_diameter(g, samples, rng)
    return _bounded_diameter(g)


def _bounded_diameter(g: Graph) -> DiameterResult:
    n = g.vertex_count
    lo = np.zeros(n, dtype=np.int64)
    hi = np.full(n, np.iinfo(np.int64).max // 4, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    best = 0
    runs = 0
    pick_high = True
    v = int(np.argmax(g.degrees))
    while True:
        d = _bfs(g.indptr, g.indices, np.array([v], dtype=np.int64))
        runs += 1
        ecc = int(d.max())
        lo = np.maximum(lo, np.maximum(d, ecc - d))
        hi = np.minimum(hi, ecc + d)
        best = max(best, ecc, int(lo.max()))
        alive[v] = False
        # a vertex matters only if its eccentricity could still beat `best`
        alive &= hi > best
        if not alive.any():
            break
        cand = np.flatnonzero(alive)
        if pick_high:
            v = int(cand[np.argmax(hi[cand])])
        else:
            v = int(cand[np.argmin(lo[cand])])
        pick_high = not pick_high
    return DiameterResult(best, "exact", runs)


def _sampled_diameter(g, samples, rng) -> DiameterResult:
    rng = rng if rng is not None else np.random.default_rng(0)
    start = np.array([0], dtype=np.int64)
    d = _bfs(g.indptr, g.indices, start)
    far = int(np.argmax(d))
    d = _bfs(g.indptr, g.indices, np.array([far], dtype=np.int64))
    best = int(d.max())
    runs = 2
    for v in rng.integers(0, g.vertex_count, size=samples):
        d = _bfs(g.indptr, g.indices, np.array([v], dtype=np.int64))
        best = max(best, int(d.max()))
        runs += 1
    return DiameterResult(best, "sampled", runs)


# --------------------------------------------------------------------------
# text format

GRAPH_HEADER = "#giantwalk-graph v1"


def dumps_graph(g: Graph) -> str:
    buf = io.StringIO()
    buf.write(f"{GRAPH_HEADER} n={g.vertex_count} m={g.edge_count}\n")
    for v, r in enumerate(g.roles):
        buf.write(f"V {v} {ROLE_NAMES[r]}\n")
    for u, v in g.edges():
        buf.write(f"E {u} {v}\n")
    return buf.getvalue()


def loads_graph(text: str) -> Graph:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(GRAPH_HEADER):
        raise GraphFormatError("missing '#giantwalk-graph v1' header")
    try:
        fields = dict(tok.split("=", 1) for tok in lines[0][len(GRAPH_HEADER):].split())
        n, m = int(fields["n"]), int(fields["m"])
    except (KeyError, ValueError):
        raise GraphFormatError(f"malformed header: {lines[0]!r}") from None
    roles = [None] * n
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        try:
            ids = [int(x) for x in parts[1:2]] + ([int(parts[2])] if parts[0] == "E" else [])
        except (ValueError, IndexError):
            raise GraphFormatError(f"line {lineno}: cannot parse {line!r}") from None
        if parts[0] == "V" and len(parts) == 3:
            if not 0 <= ids[0] < n or parts[2] not in _ROLE_CODE:
                raise GraphFormatError(f"line {lineno}: bad vertex line {line!r}")
            roles[ids[0]] = parts[2]
        elif parts[0] == "E" and len(parts) == 3:
            u, v = ids
            if u >= v:
                raise GraphFormatError(f"line {lineno}: edge must have u < v")
            edges.append((u, v))
        else:
            raise GraphFormatError(f"line {lineno}: cannot parse {line!r}")
    if any(r is None for r in roles):
        raise GraphFormatError("some vertices have no V line")
    if len(edges) != m:
        raise GraphFormatError(f"header says m={m}, found {len(edges)} edges")
    return build_graph(np.array(edges, dtype=np.int64).reshape(-1, 2), roles, n)


def write_graph(g: Graph, path: str | os.PathLike) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_graph(g))


def read_graph(path: str | os.PathLike) -> Graph:
    with open(path) as fh:
        return loads_graph(fh.read())
