"""Sampler for the emerging giant ``H``: kernel, subdivided kernel, attached trees.

Vertex ids in a sampled ``H`` are laid out in construction order: kernel
vertices ``0..|K1|-1``, then the internal vertices of the subdivision
paths (record by record, ordered from the lower kernel endpoint), then the
attached tree vertices generation by generation. ``K2`` is therefore the
prefix ``0..|K2|-1`` and the induced subgraph on it is the 2-core.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import gw
from .errors import (
    Disconnected,
    GraphFormatError,
    InfeasibleDegreeSequence,
    MissingProvenance,
    NonPositiveEpsilon,
    PairingBudgetExceeded,
    RngExhausted,
)
from .graph import KERNEL, PATH, ROLE_NAMES, TREE, Graph, _from_edge_array, is_connected

log = logging.getLogger(__name__)

PARITY_ATTEMPTS = 10_000
PAIRING_BUDGET = 100_000
SMALL_N_WARNING = 64.0
DEPTH_CAP_FACTOR = 10.0


def solve_mu(eps: float, tol: float = 1e-12) -> float:
    """Root in ``(0, 1)`` of ``mu * exp(-mu) = (1 + eps) * exp(-(1 + eps))``.

    ``x * exp(-x)`` increases on ``(0, 1)``, so plain bisection converges;
    it stops once the residual is below ``tol``.
    """
    if not eps > 0:
        raise NonPositiveEpsilon(f"eps must be positive, got {eps}")
    target = (1.0 + eps) * math.exp(-(1.0 + eps))
    lo, hi = 0.0, 1.0
    mid = 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        resid = mid * math.exp(-mid) - target
        if abs(resid) < tol:
            break
        if resid < 0:
            lo = mid
        else:
            hi = mid
    return mid


@dataclass(frozen=True)
class ModelParams:
    """Model dial ``(n, eps)`` with the conjugate parameter ``mu``."""

    n: int
    eps: float
    mu: float

    @classmethod
    def from_eps(cls, n: int, eps: float) -> "ModelParams":
        if not 0 < eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {eps}")
        if n < 1:
            raise ValueError(f"n must be positive, got {n}")
        return cls(int(n), float(eps), solve_mu(eps))

    @property
    def N(self) -> float:
        """``eps**3 * n``, the effective size parameter."""
        return self.eps ** 3 * self.n

    @property
    def depth_cap(self) -> int:
        return int(math.ceil(DEPTH_CAP_FACTOR * math.log(max(self.N, math.e)) / self.eps))


# --------------------------------------------------------------------------
# Step 1: degrees and kernel

@dataclass(frozen=True)
class DegreeSample:
    rate: float                  # realised Poisson rate Lambda
    degrees: np.ndarray          # D_u for all n vertices
    census: dict[int, int]       # N_k for k >= 3
    resample_count: int          # parity rejections
    rate_redraws: int = 0        # Lambda <= 0 redraws

    @property
    def N_ge3(self) -> int:
        return sum(self.census.values())

    @property
    def kernel_degrees(self) -> np.ndarray:
        return self.degrees[self.degrees >= 3]


def sample_degrees(params: ModelParams, rng: np.random.Generator,
                   max_attempts: int = PARITY_ATTEMPTS) -> DegreeSample:
    """Draw ``Lambda`` and i.i.d. Poisson(Lambda) degrees with even kernel sum."""
    mean = 1.0 + params.eps - params.mu
    sd = math.sqrt(1.0 / (params.eps * params.n))
    redraws = 0
    rate = rng.normal(mean, sd)
    while rate <= 0:
        redraws += 1
        rate = rng.normal(mean, sd)
    for attempt in range(max_attempts):
        d = rng.poisson(rate, size=params.n)
        big = d[d >= 3]
        if big.sum() % 2 == 0:
            ks, counts = np.unique(big, return_counts=True)
            return DegreeSample(
                rate=float(rate),
                degrees=d,
                census={int(k): int(c) for k, c in zip(ks, counts)},
                resample_count=attempt,
                rate_redraws=redraws,
            )
    raise RngExhausted(f"parity not met in {max_attempts} attempts")


def erdos_gallai(degrees) -> bool:
    """True iff ``degrees`` is the degree sequence of some simple graph."""
    d = np.sort(np.asarray(degrees, dtype=np.int64))[::-1]
    if d.sum() % 2:
        return False
    if len(d) == 0:
        return True
    if d[-1] < 0:
        return False
    n = len(d)
    k = np.arange(1, n + 1)
    lhs = np.cumsum(d)
    # sum_{i>k} min(d_i, k) for every k
    rhs_tail = np.array([np.minimum(d[j:], j).sum() for j in range(1, n + 1)])
    return bool((lhs <= k * (k - 1) + rhs_tail).all())


def _pairing(degrees: np.ndarray, rng, budget: int) -> tuple[np.ndarray, int]:
    stubs = np.repeat(np.arange(len(degrees), dtype=np.int64), degrees)
    n = len(degrees)
    for attempt in range(1, budget + 1):
        e = rng.permutation(stubs).reshape(-1, 2)
        if (e[:, 0] == e[:, 1]).any():
            continue
        e.sort(axis=1)
        key = e[:, 0] * n + e[:, 1]
        if len(np.unique(key)) == len(key):
            return e, attempt
    raise PairingBudgetExceeded(f"no simple pairing in {budget} attempts")


def sample_kernel(degrees, rng: np.random.Generator, *, budget: int = PAIRING_BUDGET,
                  require_connected: bool = False) -> Graph:
    """Uniform simple graph with the given degree sequence.

    Configuration-model pairing is repeated until the multigraph is simple;
    conditioned on simplicity every labelled simple realisation is equally
    likely. ``degrees`` may be a :class:`DegreeSample` (its ``D_u >= 3``
    entries are used, in vertex order) or any integer sequence.
    """
    graph, _ = _sample_kernel(degrees, rng, budget, require_connected)
    return graph


def _sample_kernel(degrees, rng, budget, require_connected):
    if isinstance(degrees, DegreeSample):
        degrees = degrees.kernel_degrees
    degrees = np.asarray(degrees, dtype=np.int64)
    if not erdos_gallai(degrees):
        raise InfeasibleDegreeSequence(f"not graphical: {degrees[:20].tolist()}...")
    attempts = 0
    while True:
        e, used = _pairing(degrees, rng, budget - attempts)
        attempts += used
        g = _from_edge_array(len(degrees), e, np.full(len(degrees), KERNEL, dtype=np.int8))
        if not require_connected or is_connected(g):
            return g, attempts
        if attempts >= budget:
            raise PairingBudgetExceeded(f"no connected simple pairing in {budget} attempts")


# --------------------------------------------------------------------------
# Step 2: subdivision

@dataclass(frozen=True)
class Subdivision:
    """``K2`` together with one path record per kernel edge.

    Record ``r`` replaces kernel edge ``endpoints[r]`` (lower id first) by a
    path of ``lengths[r]`` edges whose internal vertices are
    ``internal(r)``, listed from the lower endpoint.
    """

    graph: Graph
    kernel_count: int
    endpoints: np.ndarray
    lengths: np.ndarray
    offsets: np.ndarray

    def internal(self, r: int) -> np.ndarray:
        return np.arange(self.kernel_count + self.offsets[r],
                         self.kernel_count + self.offsets[r + 1])

    def path(self, r: int) -> np.ndarray:
        u, v = self.endpoints[r]
        return np.concatenate([[u], self.internal(r), [v]])

    @property
    def record_of(self) -> np.ndarray:
        """Record id of every internal path vertex, indexed by ``id - |K1|``."""
        return np.repeat(np.arange(len(self.lengths)), self.lengths - 1)


def subdivide(k1: Graph, mu: float, rng: np.random.Generator) -> Subdivision:
    """Replace each kernel edge by a path of Geom(1 - mu) edges (support 1, 2, ...)."""
    ends = k1.edges()
    m = len(ends)
    n1 = k1.vertex_count
    lengths = rng.geometric(1.0 - mu, size=m).astype(np.int64) if mu > 0 else np.ones(m, np.int64)
    internal = lengths - 1
    offsets = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(internal, out=offsets[1:])
    # sequence u, i_1, ..., i_{L-1}, v for every record, then consecutive pairs
    seq_len = lengths + 1
    rec = np.repeat(np.arange(m), seq_len)
    pos = np.arange(seq_len.sum()) - np.repeat(np.cumsum(seq_len) - seq_len, seq_len)
    seq = n1 + offsets[rec] + pos - 1
    first = pos == 0
    last = pos == seq_len[rec] - 1
    seq[first] = ends[rec[first], 0]
    seq[last] = ends[rec[last], 1]
    same = rec[1:] == rec[:-1]
    edges = np.column_stack([seq[:-1][same], seq[1:][same]])
    n2 = n1 + int(offsets[-1])
    roles = np.full(n2, PATH, dtype=np.int8)
    roles[:n1] = KERNEL
    g = _from_edge_array(n2, np.sort(edges, axis=1), roles)
    return Subdivision(g, n1, ends, lengths, offsets)


# --------------------------------------------------------------------------
# Step 3: trees, and the assembled sample

@dataclass(frozen=True, eq=False)
class GiantSample:
    """A sampled ``H`` with full construction provenance.

    ``parent[v]`` is ``-1`` on ``K2`` and the tree parent elsewhere;
    ``depth[v]`` is the distance to ``K2``; ``root[v]`` the ``K2`` vertex
    whose tree contains ``v``.
    """

    graph: Graph
    params: ModelParams
    seed: int | None
    kernel_count: int
    k2_count: int
    endpoints: np.ndarray
    lengths: np.ndarray
    offsets: np.ndarray
    parent: np.ndarray
    depth: np.ndarray
    root: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def kernel_vertices(self) -> np.ndarray:
        return np.arange(self.kernel_count)

    @property
    def k2_vertices(self) -> np.ndarray:
        return np.arange(self.k2_count)

    @property
    def tree_vertex_count(self) -> int:
        return self.graph.vertex_count - self.k2_count

    def k1_graph(self) -> Graph:
        return _from_edge_array(
            self.kernel_count, self.endpoints.copy(),
            np.full(self.kernel_count, KERNEL, dtype=np.int8))

    def k2_graph(self) -> Graph:
        return self.graph.subgraph(self.k2_vertices)

    def tree_depths(self) -> np.ndarray:
        """Depth of the tree hanging at each ``K2`` vertex (0 if bare)."""
        out = np.zeros(self.k2_count, dtype=np.int64)
        np.maximum.at(out, self.root, self.depth)
        return out

    def tree_sizes(self) -> np.ndarray:
        return np.bincount(self.root, minlength=self.k2_count)

    def path_record_of(self) -> np.ndarray:
        """Record id per vertex: kernel -> own id, path -> record, tree -> root."""
        rec = self.root.copy()
        rec[self.kernel_count:self.k2_count] = np.repeat(
            np.arange(len(self.lengths)), self.lengths - 1)
        rec[:self.kernel_count] = np.arange(self.kernel_count)
        return rec


def attach_trees(k2: Subdivision, mu: float, rng: np.random.Generator, *,
                 params: ModelParams, seed: int | None = None,
                 depth_cap: int | None = None) -> GiantSample:
    """Hang an independent PGW(mu) tree on every ``K2`` vertex (root identified with it)."""
    n2 = k2.graph.vertex_count
    cap = params.depth_cap if depth_cap is None else depth_cap
    forest = gw.grow_forest(mu, n2, cap, rng)
    tree_ids = np.arange(n2, forest.size)
    tree_edges = np.column_stack([forest.parent[tree_ids], tree_ids])
    edges = np.concatenate([k2.graph.edges(), tree_edges])
    roles = np.concatenate([k2.graph.roles, np.full(len(tree_ids), TREE, dtype=np.int8)])
    g = _from_edge_array(forest.size, edges, roles)
    cap_hits = int(forest.truncated.sum())
    if cap_hits:
        log.warning("depth cap %d hit by %d trees", cap, cap_hits)
    return GiantSample(
        graph=g,
        params=params,
        seed=seed,
        kernel_count=k2.kernel_count,
        k2_count=n2,
        endpoints=k2.endpoints,
        lengths=k2.lengths,
        offsets=k2.offsets,
        parent=forest.parent,
        depth=forest.depth,
        root=forest.tree,
        stats={"depth_cap": cap, "depth_cap_hits": cap_hits},
    )


def sample_giant(params: ModelParams, seed: int) -> GiantSample:
    """Run Steps 1-3 from one seeded generator; deterministic in ``(params, seed)``."""
    if params.N < SMALL_N_WARNING:
        warnings.warn(
            f"eps^3 n = {params.N:g} < {SMALL_N_WARNING:g}: far from the emerging-giant regime",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    ds = sample_degrees(params, rng)
    if ds.N_ge3 < 4:
        raise InfeasibleDegreeSequence(f"only {ds.N_ge3} kernel vertices; need at least 4")
    k1, attempts = _sample_kernel(ds, rng, PAIRING_BUDGET, True)
    k2 = subdivide(k1, params.mu, rng)
    long_limit = 2.0 / params.eps * math.log(ds.N_ge3)
    long_paths = int((k2.lengths > long_limit).sum())
    if long_paths:
        log.warning("%d subdivision paths longer than %.1f", long_paths, long_limit)
    gs = attach_trees(k2, params.mu, rng, params=params, seed=seed)
    if not is_connected(gs.graph):
        raise Disconnected("sampled H is disconnected")
    gs.stats.update(
        rate=ds.rate,
        rate_redraws=ds.rate_redraws,
        parity_resamples=ds.resample_count,
        pairing_attempts=attempts,
        degree_census=ds.census,
        long_paths=long_paths,
        max_path_length=int(k2.lengths.max()) if len(k2.lengths) else 0,
    )
    return gs


# --------------------------------------------------------------------------
# APOH statistics

@dataclass(frozen=True)
class ApohReport:
    counts: dict[str, int]
    targets: dict[str, float]
    ratios: dict[str, float]
    census: gw.DepthCensus | None

    def as_dict(self) -> dict:
        out = {"counts": self.counts, "targets": self.targets, "ratios": self.ratios}
        if self.census is not None:
            c = self.census
            out["census"] = {
                "gamma": c.gamma, "threshold": c.threshold, "count": c.count,
                "exponent": c.exponent, "band": list(c.band), "max_depth": c.max_depth,
                "deep_limit": c.deep_limit, "over_deep_limit": c.over_deep_limit,
            }
        else:
            out["census"] = None
        return out


def apoh_report(gs: GiantSample, gamma: float = 0.5) -> ApohReport:
    """Sizes of ``K1``, ``K2`` and ``H`` against their first-order targets."""
    p = gs.params
    eps, n, N = p.eps, p.n, p.N
    k2_edges = int(gs.lengths.sum())
    counts = {
        "V(K1)": gs.kernel_count,
        "E(K1)": len(gs.endpoints),
        "V(K2)": gs.k2_count,
        "E(K2)": k2_edges,
        "V(H)": gs.graph.vertex_count,
        "E(H)": gs.graph.edge_count,
    }
    targets = {
        "V(K1)": 4.0 * N / 3.0,
        "E(K1)": 2.0 * N,
        "V(K2)": 2.0 * eps ** 2 * n,
        "E(K2)": 2.0 * eps ** 2 * n,
        "V(H)": 2.0 * eps * n,
        "E(H)": 2.0 * eps * n,
    }
    ratios = {k: counts[k] / targets[k] for k in counts}
    census = gw.depth_census(gs, gamma) if gs.tree_vertex_count else None
    return ApohReport(counts, targets, ratios, census)


def expected_counts(params: ModelParams) -> dict[str, float]:
    """First-moment predictions of the APOH counts at finite ``eps``.

    Uses the mean rate ``1 + eps - mu``; kernel edges are half the expected
    degree mass on ``D >= 3``, paths have mean ``1/(1-mu)`` edges and trees
    mean size ``1/(1-mu)``.
    """
    from scipy.stats import poisson

    lam = 1.0 + params.eps - params.mu
    n = params.n
    v1 = n * poisson.sf(2, lam)
    # E[D; D >= 3] = lam * Pr(Poisson(lam) >= 2)
    e1 = 0.5 * n * lam * poisson.sf(1, lam)
    path_mean = 1.0 / (1.0 - params.mu)
    e2 = e1 * path_mean
    v2 = v1 + e1 * (path_mean - 1.0)
    vh = v2 * path_mean
    eh = e2 + (vh - v2)
    return {"V(K1)": v1, "E(K1)": e1, "V(K2)": v2, "E(K2)": e2, "V(H)": vh, "E(H)": eh}


# --------------------------------------------------------------------------
# provenance sidecar

PROV_HEADER = "#giantwalk-prov v1"


def dumps_provenance(gs: GiantSample) -> str:
    p = gs.params
    lines = [f"{PROV_HEADER} n={p.n} eps={p.eps!r} mu={p.mu!r} seed={gs.seed}"]
    rec = gs.path_record_of()
    roles = gs.graph.roles
    for v in range(gs.graph.vertex_count):
        par = "-" if gs.parent[v] < 0 else str(gs.parent[v])
        lines.append(f"P {v} {par} {ROLE_NAMES[roles[v]]} {rec[v]}")
    return "\n".join(lines) + "\n"


def loads_sample(graph: Graph, prov_text: str) -> GiantSample:
    """Rebuild a :class:`GiantSample` from a graph and its provenance sidecar."""
    lines = prov_text.splitlines()
    if not lines or not lines[0].startswith(PROV_HEADER):
        raise MissingProvenance("missing '#giantwalk-prov v1' header")
    try:
        hdr = dict(t.split("=", 1) for t in lines[0][len(PROV_HEADER):].split())
        params = ModelParams(int(hdr["n"]), float(hdr["eps"]), float(hdr["mu"]))
        seed = None if hdr.get("seed", "None") == "None" else int(hdr["seed"])
    except (KeyError, ValueError):
        raise GraphFormatError(f"malformed provenance header {lines[0]!r}") from None
    n = graph.vertex_count
    parent = np.full(n, -2, dtype=np.int64)
    record = np.zeros(n, dtype=np.int64)
    for line in lines[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] != "P" or len(parts) != 5:
            raise GraphFormatError(f"cannot parse provenance line {line!r}")
        v = int(parts[1])
        parent[v] = -1 if parts[2] == "-" else int(parts[2])
        if ROLE_NAMES[graph.roles[v]] != parts[3]:
            raise MissingProvenance(f"role mismatch at vertex {v}")
        record[v] = int(parts[4])
    if (parent == -2).any():
        raise MissingProvenance("provenance does not cover every vertex")
    roles = graph.roles
    n1 = int((roles == KERNEL).sum())
    n2 = int((roles != TREE).sum())
    if not ((roles[:n1] == KERNEL).all() and (roles[n1:n2] == PATH).all()):
        raise MissingProvenance("vertex ids are not in construction order")
    # depth and root follow from parents; parents precede children
    depth = np.zeros(n, dtype=np.int64)
    root = np.arange(n, dtype=np.int64)
    for v in range(n2, n):
        depth[v] = depth[parent[v]] + 1
        root[v] = root[parent[v]]
    endpoints, lengths = _contract_paths(graph, n1, n2)
    offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
    np.cumsum(lengths - 1, out=offsets[1:])
    return GiantSample(graph, params, seed, n1, n2, endpoints, lengths, offsets,
                       parent, depth, root, {})


def _contract_paths(graph: Graph, n1: int, n2: int):
    """Recover kernel edges and path lengths by walking ``K2`` from each kernel vertex."""
    found = {}
    for u in range(n1):
        for w in graph.neighbors(u):
            if w >= n2:
                continue
            prev, cur, length = u, int(w), 1
            while cur >= n1:
                nxt = [x for x in graph.neighbors(cur) if x < n2 and x != prev]
                prev, cur = cur, int(nxt[0])
                length += 1
            key = (min(u, cur), max(u, cur))
            found[key] = length
    keys = sorted(found)
    return np.array(keys, dtype=np.int64).reshape(-1, 2), np.array([found[k] for k in keys], dtype=np.int64)
