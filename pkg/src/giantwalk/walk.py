"""Random-walk cover times: simulation, exact small-graph oracle, predictors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import Disconnected, StepBudgetExceeded, TooLarge
from .graph import Graph, is_connected

EXACT_LIMIT = 14
BUDGET_FACTOR = 10_000


# --------------------------------------------------------------------------
# per-replica random streams (xoshiro256**), independent of scheduling

def replica_states(seed: int, start: int, replicas: int) -> np.ndarray:
    """One 256-bit xoshiro state per replica, derived from ``(seed, start, replica)``."""
    states = np.empty((replicas, 4), dtype=np.uint64)
    for r in range(replicas):
        st = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(start), r]).generate_state(4, np.uint64)
        if not st.any():
            st[0] = 1
        states[r] = st
    return states


@numba.njit(inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@numba.njit(inline="always")
def _next(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@numba.njit(cache=True)
def _cover_walks(indptr, indices, start, states, budget):
    n = len(indptr) - 1
    replicas = states.shape[0]
    steps_out = np.empty(replicas, dtype=np.int64)
    seen = np.zeros(n, dtype=np.uint8)
    scale = 1.0 / 9007199254740992.0  # 2**-53
    for r in range(replicas):
        s = states[r].copy()
        seen[:] = 0
        v = start
        seen[v] = 1
        remaining = n - 1
        steps = 0
        while remaining > 0:
            if steps >= budget:
                steps = -1
                break
            lo = indptr[v]
            deg = indptr[v + 1] - lo
            u = (_next(s) >> np.uint64(11)) * scale
            v = indices[lo + int(u * deg)]
            steps += 1
            if seen[v] == 0:
                seen[v] = 1
                remaining -= 1
        steps_out[r] = steps
    return steps_out


@dataclass(frozen=True)
class CoverSimulation:
    start: int
    steps: np.ndarray = field(repr=False)

    @property
    def replicas(self) -> int:
        return len(self.steps)

    @property
    def mean(self) -> float:
        return float(self.steps.mean())

    @property
    def se(self) -> float:
        return float(self.steps.std(ddof=1) / math.sqrt(len(self.steps)))


def default_budget(g: Graph) -> int:
    return int(BUDGET_FACTOR * g.edge_count * max(1.0, math.log(g.vertex_count)))


def simulate_cover(g: Graph, start: int, replicas: int, seed: int,
                   budget: int | None = None) -> CoverSimulation:
    """Cover times of ``replicas`` independent walks from ``start``.

    Replica ``r`` draws from its own stream derived from ``(seed, start, r)``,
    so results do not depend on how replicas are batched.
    """
    if replicas < 10:
        raise ValueError("simulate_cover needs at least 10 replicas")
    if not is_connected(g):
        raise Disconnected("cover time is infinite on a disconnected graph")
    if g.vertex_count == 1:
        return CoverSimulation(int(start), np.zeros(replicas, dtype=np.int64))
    budget = default_budget(g) if budget is None else int(budget)
    states = replica_states(seed, start, replicas)
    steps = _cover_walks(g.indptr, g.indices, int(start), states, budget)
    if (steps < 0).any():
        raise StepBudgetExceeded(f"walk from {start} exceeded {budget} steps")
    return CoverSimulation(int(start), steps)


# --------------------------------------------------------------------------
# exact cover time on small graphs

def exact_cover_all(g: Graph) -> np.ndarray:
    """Exact expected cover time from every start vertex.

    The state is ``(position, visited set)``. Sets are processed from the
    full set downwards; for a fixed set ``S`` the unknowns ``E[v, S]``,
    ``v in S``, satisfy ``E[v,S] - mean_{u~v, u in S} E[u,S] =
    1 + mean_{u~v, u notin S} E[u, S + u]``, a small linear system.
    """
    n = g.vertex_count
    if n > EXACT_LIMIT:
        raise TooLarge(f"exact cover time is limited to {EXACT_LIMIT} vertices")
    if not is_connected(g):
        raise Disconnected("cover time is infinite on a disconnected graph")
    if n == 1:
        return np.zeros(1)
    full = (1 << n) - 1
    nbrs = [g.neighbors(v).tolist() for v in range(n)]
    deg = g.degrees
    E = {full: np.zeros(n)}
    masks = sorted(range(1, full), key=lambda m: -bin(m).count("1"))
    for S in masks:
        members = [v for v in range(n) if S >> v & 1]
        # only sets reachable by a walk (connected) matter, but solving all is harmless
        idx = {v: k for k, v in enumerate(members)}
        k = len(members)
        A = np.eye(k)
        b = np.ones(k)
        for v in members:
            i = idx[v]
            for u in nbrs[v]:
                if S >> u & 1:
                    A[i, idx[u]] -= 1.0 / deg[v]
                else:
                    b[i] += E[S | (1 << u)][u] / deg[v]
        vals = np.zeros(n)
        try:
            vals[members] = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            # S with a component that has no exit; never reached from {start}
            vals[members] = np.nan
        E[S] = vals
    return np.array([E[1 << v][v] for v in range(n)])


def exact_cover_small(g: Graph, start: int) -> float:
    return float(exact_cover_all(g)[start])


# --------------------------------------------------------------------------
# predictors

DEFAULT_LAMBDAS = (1.0, 3.0, 10.0)


@dataclass(frozen=True)
class CoverPrediction:
    headline: float                  # n ln^2 N
    dlp_center: float                # |E| M^2
    dlp_band: tuple[float, float]    # [c1 |E| M^2, c2 |E| M^2]
    zhai: dict[float, tuple[float, float]]  # lambda -> |E|M^2 -/+ |E|(sqrt(lambda R) M + lambda R)
    feige: tuple[float, float]       # [V ln V, 4/27 V^3]

    def as_dict(self) -> dict:
        return {
            "headline": self.headline,
            "dlp_center": self.dlp_center,
            "dlp_band": list(self.dlp_band),
            "zhai": {str(k): list(v) for k, v in self.zhai.items()},
            "feige": list(self.feige),
        }


def feige_bounds(vertex_count: int) -> tuple[float, float]:
    n = vertex_count
    return n * math.log(n), 4.0 / 27.0 * n ** 3


def predict_cover(params, edge_count: int, M: float, R: float, *,
                  vertex_count: int | None = None, c1: float = 0.5, c2: float = 2.0,
                  lambdas=DEFAULT_LAMBDAS) -> CoverPrediction:
    """Predictor stack for the cover time of a giant sample.

    ``vertex_count`` sets the Feige interval and defaults to ``params.n``.
    """
    if edge_count <= 0 or M < 0 or R < 0:
        raise ValueError("edge_count must be positive and M, R non-negative")
    n = params.n
    headline = n * math.log(params.N) ** 2
    centre = edge_count * M * M
    zhai = {}
    for lam in lambdas:
        half = edge_count * (math.sqrt(lam * R) * M + lam * R)
        zhai[float(lam)] = (centre - half, centre + half)
    return CoverPrediction(
        headline=headline,
        dlp_center=centre,
        dlp_band=(c1 * centre, c2 * centre),
        zhai=zhai,
        feige=feige_bounds(vertex_count if vertex_count is not None else n),
    )


def feige_check(cover: float, vertex_count: int, slack: float = 0.1) -> bool:
    lo, hi = feige_bounds(vertex_count)
    return (1 - slack) * lo <= cover <= (1 + slack) * hi


# --------------------------------------------------------------------------
# cover-time report on a giant sample

@dataclass(frozen=True)
class CoverTimeReport:
    starts: list[int]
    labels: list[str]
    runs: list[CoverSimulation]
    prediction: CoverPrediction

    @property
    def means(self) -> np.ndarray:
        return np.array([r.mean for r in self.runs])

    @property
    def cover_time(self) -> float:
        """Largest mean over the start panel (estimate of ``max_v C_v``)."""
        return float(self.means.max())

    def ratio_table(self) -> dict[str, float]:
        c = self.cover_time
        p = self.prediction
        return {
            "cover/headline": c / p.headline,
            "cover/dlp_center": c / p.dlp_center if p.dlp_center > 0 else float("inf"),
        }


def start_panel(gs, rng: np.random.Generator, random_starts: int = 8) -> tuple[list[int], list[str]]:
    """Kernel vertex 0, the deepest tree vertex, then ``random_starts`` uniform vertices."""
    deepest = int(np.argmax(gs.depth))
    starts = [0, deepest]
    labels = ["kernel", "deepest"]
    for v in rng.integers(0, gs.graph.vertex_count, size=random_starts):
        starts.append(int(v))
        labels.append("random")
    return starts, labels


def cover_report(gs, M: float, R: float, *, replicas: int, seed: int,
                 random_starts: int = 8, **predict_kw) -> CoverTimeReport:
    rng = np.random.default_rng(seed)
    starts, labels = start_panel(gs, rng, random_starts)
    runs = [simulate_cover(gs.graph, s, replicas, seed) for s in starts]
    pred = predict_cover(gs.params, gs.graph.edge_count, M, R,
                         vertex_count=gs.graph.vertex_count, **predict_kw)
    return CoverTimeReport(starts, labels, runs, pred)
