"""Chaining hierarchy over the trees of a giant sample.

Everything is indexed by ``depth`` (distance to ``K2``) and the tree parent
pointers of a :class:`~giantwalk.giant.GiantSample`. A ``d``-descendant of
``v`` is a vertex of its subtree ``d`` levels below it. Wherever a choice is
free, the lowest vertex id wins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import BudgetViolation, MissingProvenance, RecursionStuck
from .graph import bfs_distances


def kappa_of(eps: float) -> int:
    """Smallest power of two that is at least ``1/eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    k = 1
    while k * eps < 1.0 - 1e-12:
        k *= 2
    return k


# --------------------------------------------------------------------------
# ancestors

def _ancestor_table(parent: np.ndarray, levels: int) -> np.ndarray:
    """``up[i][v]`` is the ``2**i``-ancestor of ``v`` or ``-1``."""
    n = len(parent)
    ext = np.append(parent, -1).astype(np.int64)
    ext[ext < 0] = n  # sentinel maps to itself
    up = [ext]
    for _ in range(levels):
        prev = up[-1]
        up.append(prev[prev])
    out = np.stack(up)[:, :n]
    out[out == n] = -1
    return out


def ancestor(parent: np.ndarray, v: np.ndarray, k: int) -> np.ndarray:
    """Walk ``k`` parent steps from every entry of ``v`` (``-1`` once off the tree)."""
    v = np.asarray(v, dtype=np.int64).copy()
    for _ in range(k):
        ok = v >= 0
        v[ok] = parent[v[ok]]
    return v


def subtree_height(parent: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """``h[v]`` = largest ``d`` such that ``v`` has a ``d``-descendant."""
    h = np.zeros(len(parent), dtype=np.int64)
    for d in range(int(depth.max()) if len(depth) else 0, 0, -1):
        lev = np.flatnonzero(depth == d)
        np.maximum.at(h, parent[lev], h[lev] + 1)
    return h


# --------------------------------------------------------------------------
# hierarchy

@dataclass(frozen=True)
class SkeletonHierarchy:
    eps: float
    kappa: int
    l0: int
    depth: np.ndarray = field(repr=False)
    parent: np.ndarray = field(repr=False)
    height: np.ndarray = field(repr=False)
    U: list[np.ndarray] = field(repr=False)
    U_overflow: int
    J: list[np.ndarray] = field(repr=False)          # J[i] is (m, 2) of (ancestor, descendant)
    first: np.ndarray = field(repr=False)            # first[i][x] = J_i partner of x, or -1
    select: np.ndarray = field(repr=False)           # select[i][v0] = x chosen in J_{i+1}, or -1
    phi: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)              # -1 where undefined (K2)
    alpha: np.ndarray = field(repr=False)
    ancestors: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.depth)

    def W(self, k: int) -> np.ndarray:
        if k < 1 or k & (k - 1) or k > self.kappa:
            raise ValueError("k must be a power of two in [1, kappa]")
        return np.flatnonzero(self.depth % k == 0)

    def level(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.depth == k)

    def descendant(self, v: int, d: int) -> int:
        """Lowest-id ``d``-descendant of ``v`` (``x_d(v)``), or ``-1`` if ``v`` is no ``d``-survivor."""
        if self.height[v] < d:
            return -1
        cand = self.level(int(self.depth[v]) + d)
        hit = cand[ancestor(self.parent, cand, d) == v]
        return int(hit.min())

    def J_sizes(self) -> list[int]:
        return [len(j) for j in self.J]

    def U_sizes(self) -> list[int]:
        return [len(u) for u in self.U]


def _anc_pow(up: np.ndarray, v: np.ndarray, k: int) -> np.ndarray:
    """``k``-ancestor through the lifting table (``k`` any non-negative int)."""
    v = v.copy()
    i = 0
    while k:
        if k & 1:
            ok = v >= 0
            v[ok] = up[i][v[ok]]
        k >>= 1
        i += 1
    return v


def build_hierarchy(gs, *, u_levels: int | None = None) -> SkeletonHierarchy:
    """Build ``U^j``, ``W_k``, ``J_0..J_l0``, ``phi``, ``psi`` and ``alpha`` for ``gs``."""
    parent = getattr(gs, "parent", None)
    depth = getattr(gs, "depth", None)
    if parent is None or depth is None or len(parent) != gs.graph.vertex_count:
        raise MissingProvenance("sample carries no tree provenance")
    parent = np.asarray(parent, dtype=np.int64)
    depth = np.asarray(depth, dtype=np.int64)
    n = len(parent)
    eps = gs.params.eps
    kappa = kappa_of(eps)
    l0 = kappa.bit_length() - 1
    max_depth = int(depth.max()) if n else 0
    up = _ancestor_table(parent, max(l0, max(max_depth, 1).bit_length()))
    height = subtree_height(parent, depth)

    # J_0: every tree edge, (parent, child)
    kids = np.flatnonzero(parent >= 0)
    J = [np.column_stack([parent[kids], kids])]
    first = np.full((l0 + 1, n), -1, dtype=np.int64)
    first[0, kids] = parent[kids]
    select = np.full((max(l0, 1), n), -1, dtype=np.int64)
    for i in range(l0):
        s = 1 << i
        z = J[i][:, 1]
        z = z[depth[z] % (2 * s) == 0]
        z = z[depth[z] >= 2 * s]
        v0 = up[i][z]
        best = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(best, v0, z)
        owners = np.flatnonzero(best < np.iinfo(np.int64).max)
        x = best[owners]
        select[i, owners] = x
        v1 = up[i + 1][x]
        order = np.argsort(x, kind="stable")
        J.append(np.column_stack([v1[order], x[order]]))
        first[i + 1, x] = v1

    # phi, psi
    phi = np.zeros(n, dtype=np.int64)
    for i in range(1, l0 + 1):
        phi[depth % (1 << i) == 0] = i
    psi = np.full(n, -1, dtype=np.int64)
    for i in range(l0 + 1):
        hit = (first[i] >= 0) & (i <= phi)
        psi[hit] = i

    # alpha: nearest proper ancestor whose depth is a multiple of kappa
    tree = parent >= 0
    alpha = np.full(n, -1, dtype=np.int64)
    step = np.where(tree, (depth - 1) % kappa + 1, 0)
    for k in range(1, kappa + 1):
        sel = tree & (step == k)
        alpha[sel] = _anc_pow(up, np.flatnonzero(sel), k)

    # U^j: lowest-id kappa-descendant of each kappa-survivor one block up
    j_max = u_levels if u_levels is not None else int(math.ceil(2 * math.log(gs.params.N)))
    U = [np.flatnonzero(~tree)]
    for j in range(1, j_max + 1):
        cand = np.flatnonzero(depth == j * kappa)
        if not len(cand):
            U.append(np.empty(0, dtype=np.int64))
            continue
        owner = _anc_pow(up, cand, kappa)
        best = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(best, owner, cand)
        U.append(np.sort(best[best < np.iinfo(np.int64).max]))
    overflow = int((depth > j_max * kappa).sum())

    return SkeletonHierarchy(
        eps=eps, kappa=kappa, l0=l0, depth=depth, parent=parent, height=height,
        U=U, U_overflow=overflow, J=J, first=first, select=select,
        phi=phi, psi=psi, alpha=alpha, ancestors=up,
    )


# --------------------------------------------------------------------------
# chains

# status codes from the chain kernel
_OK, _STUCK, _LEX, _LONG = 0, 1, 2, 3


@numba.njit(cache=True)
def _chain(v, first, select, phi, psi, l0, buf, levels):
    """Fill ``buf`` with the chain from ``v``; ``levels[t]`` is the J index of link ``t``.

    Returns ``(length, status)`` where ``length`` counts vertices.
    """
    cap = len(buf)
    buf[0] = v
    t = 1
    if psi[v] < 0:
        return t, _OK
    while True:
        f = phi[v]
        j = psi[v]
        if j < 0:
            return t, _STUCK
        if j == f:
            a = first[j, v]
            if a < 0:
                return t, _STUCK
            if t >= cap:
                return t, _LONG
            levels[t - 1] = j
            buf[t] = a
            t += 1
            if phi[a] == l0:
                return t, _OK
            if phi[a] <= f:
                return t, _LEX
            v = a
        else:
            z = first[j, v]
            if z < 0 or j >= select.shape[0]:
                return t, _STUCK
            a = select[j, z]
            if a < 0 or first[j, a] != z:
                return t, _STUCK
            if t + 1 >= cap:
                return t, _LONG
            levels[t - 1] = j
            buf[t] = z
            levels[t] = j
            buf[t + 1] = a
            t += 2
            if phi[a] != f or psi[a] <= j:
                return t, _LEX
            v = a


@numba.njit(cache=True)
def _all_chains(first, select, phi, psi, l0, cap):
    n = len(phi)
    counts = np.zeros((n, l0 + 1), dtype=np.int64)
    ends = np.empty(n, dtype=np.int64)
    lengths = np.empty(n, dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    buf = np.empty(cap, dtype=np.int64)
    levels = np.empty(cap, dtype=np.int64)
    for v in range(n):
        t, st = _chain(v, first, select, phi, psi, l0, buf, levels)
        for k in range(t - 1):
            counts[v, levels[k]] += 1
        ends[v] = buf[t - 1] if psi[v] >= 0 else -1
        lengths[v] = t
        status[v] = st
    return counts, ends, lengths, status


def _chain_cap(l0: int) -> int:
    return 2 * sum(1 + 2 * (l0 - i) for i in range(l0 + 1)) + 4


def budget(l0: int) -> np.ndarray:
    """Per-level link budget ``1 + 2 (l0 - i)``."""
    return 1 + 2 * (l0 - np.arange(l0 + 1))


@dataclass(frozen=True)
class ChainDecomposition:
    vertex: int
    chain: np.ndarray          # v = v_0, ..., v_t = alpha(v); just (v,) on K2
    link_levels: np.ndarray    # J index of each link
    counts: np.ndarray         # m_i

    @property
    def end(self) -> int:
        return int(self.chain[-1])

    def within_budget(self, l0: int) -> bool:
        return bool((self.counts <= budget(l0)).all())


def chain_decompose(h: SkeletonHierarchy, v: int) -> ChainDecomposition:
    """Chain from ``v`` to ``alpha(v)`` following the two cases of the recursion."""
    cap = _chain_cap(h.l0)
    buf = np.empty(cap, dtype=np.int64)
    levels = np.empty(cap, dtype=np.int64)
    t, st = _chain(int(v), h.first, h.select, h.phi, h.psi, h.l0, buf, levels)
    if st != _OK:
        raise RecursionStuck(f"chain from {v} failed with status {st}")
    if h.psi[v] >= 0 and buf[t - 1] != h.alpha[v]:
        raise RecursionStuck(f"chain from {v} ended at {buf[t - 1]}, not alpha={h.alpha[v]}")
    lv = levels[: t - 1].copy()
    return ChainDecomposition(int(v), buf[:t].copy(), lv, np.bincount(lv, minlength=h.l0 + 1))


@dataclass(frozen=True)
class AllChains:
    counts: np.ndarray = field(repr=False)
    ends: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)
    status: np.ndarray = field(repr=False)


def all_chains(h: SkeletonHierarchy) -> AllChains:
    c, e, ln, st = _all_chains(h.first, h.select, h.phi, h.psi, h.l0, _chain_cap(h.l0))
    return AllChains(c, e, ln, st)


# --------------------------------------------------------------------------
# independent validation

@dataclass(frozen=True)
class PropertyReport:
    A: int   # violating pairs
    B: int
    C: int   # survivors without exactly one correct representative
    D: int   # elements of pi2(J_{i+1}) missing from pi2(J_i)
    W_nested: bool

    @property
    def ok(self) -> bool:
        return self.A == 0 and self.B == 0 and self.C == 0 and self.D == 0 and self.W_nested


def validate_properties(h: SkeletonHierarchy, gs) -> PropertyReport:
    """Re-check Properties A to D from the sample itself.

    Uses plain parent walks and the graph's edge list, not the lifting
    table or the selection maps that built the pairings.
    """
    parent, depth = np.asarray(gs.parent), np.asarray(gs.depth)
    n = len(parent)
    bad_a = 0
    for i, Ji in enumerate(h.J):
        s = 1 << i
        if not len(Ji):
            continue
        v1, v2 = Ji[:, 0], Ji[:, 1]
        ok = (depth[v1] % s == 0) & (depth[v2] % s == 0) & (depth[v2] == depth[v1] + s)
        ok &= ancestor(parent, v2, s) == v1
        bad_a += int((~ok).sum())

    # B: tree edges are exactly the graph edges with a non-K2 endpoint
    e = gs.graph.edges()
    on_k2 = parent < 0
    outside = e[~(on_k2[e[:, 0]] & on_k2[e[:, 1]])]
    want = {(int(min(a, b)), int(max(a, b))) for a, b in outside}
    have = {(int(min(a, b)), int(max(a, b))) for a, b in h.J[0]}
    bad_b = len(want ^ have)

    # C and D
    height = np.zeros(n, dtype=np.int64)
    for v in np.argsort(-depth, kind="stable"):
        if parent[v] >= 0:
            height[parent[v]] = max(height[parent[v]], height[v] + 1)
    bad_c = bad_d = 0
    for i in range(h.l0):
        s = 1 << i
        nxt = h.J[i + 1]
        x = nxt[:, 1]
        in_prev = np.zeros(n, dtype=bool)
        in_prev[h.J[i][:, 1]] = True
        bad_d += int((~in_prev[x]).sum())
        # every x is paired with its 2s-ancestor and hangs s below some v0 in W_s \ W_2s
        v0 = ancestor(parent, x, s)
        ok = (v0 >= 0) & (ancestor(parent, x, 2 * s) == nxt[:, 0]) & (depth[x] % (2 * s) == 0)
        bad_c += int((~ok).sum())
        reps = np.bincount(v0[v0 >= 0], minlength=n)
        surv = np.flatnonzero((depth % (2 * s) == s) & (height >= s))
        bad_c += int((reps[surv] != 1).sum())
        # nothing outside the survivor set may own a representative
        owners = np.flatnonzero(reps > 0)
        bad_c += int((~((depth[owners] % (2 * s) == s) & (height[owners] >= s))).sum())

    nested = True
    prev = None
    for i in range(h.l0 + 1):
        w = set(np.flatnonzero(depth % (1 << i) == 0).tolist())
        if prev is not None and not w <= prev:
            nested = False
        prev = w
    return PropertyReport(bad_a, bad_b, bad_c, bad_d, nested)


# --------------------------------------------------------------------------
# budgets and size tables

@dataclass(frozen=True)
class BudgetReport:
    kappa: int
    l0: int
    vertices: int
    budget_violations: int
    lex_violations: int
    stuck: int
    alpha_mismatch: int
    max_counts: list[int]
    budget: list[int]
    U_sizes: list[int]
    U_overflow: int
    U_decay: float | None        # fitted -d ln|U^j| / dj
    U_decay_target: float        # eps * kappa
    J_sizes: list[int]
    J_slope: float | None        # fitted d ln|J_i| / di
    J_slope_target: float        # -2 ln 2

    @property
    def ok(self) -> bool:
        return (self.budget_violations == 0 and self.lex_violations == 0
                and self.stuck == 0 and self.alpha_mismatch == 0)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _fit_slope(y: list[int], start: int = 0) -> float | None:
    idx = np.array([i for i in range(start, len(y)) if y[i] > 0])
    if len(idx) < 2:
        return None
    return float(np.polyfit(idx, np.log(np.asarray(y, float)[idx]), 1)[0])


def verify_budgets(h: SkeletonHierarchy, *, strict: bool = True) -> BudgetReport:
    """Run every chain and tabulate ``|U^j|`` and ``|J_i|``.

    With ``strict`` any budget breach, lexicographic failure or stuck
    recursion raises :class:`BudgetViolation`.
    """
    ch = all_chains(h)
    b = budget(h.l0)
    tree = h.psi >= 0
    over = int(((ch.counts > b).any(axis=1) & tree).sum())
    lex = int((ch.status == _LEX).sum())
    stuck = int(((ch.status == _STUCK) | (ch.status == _LONG)).sum())
    mism = int((tree & (ch.status == _OK) & (ch.ends != h.alpha)).sum())
    Us, Js = h.U_sizes(), h.J_sizes()
    decay = _fit_slope(Us, start=1)
    rep = BudgetReport(
        kappa=h.kappa, l0=h.l0, vertices=h.n,
        budget_violations=over, lex_violations=lex, stuck=stuck, alpha_mismatch=mism,
        max_counts=ch.counts.max(axis=0).tolist() if h.n else [0] * (h.l0 + 1),
        budget=b.tolist(),
        U_sizes=Us, U_overflow=h.U_overflow,
        U_decay=None if decay is None else -decay,
        U_decay_target=h.eps * h.kappa,
        J_sizes=Js, J_slope=_fit_slope(Js), J_slope_target=-2 * math.log(2),
    )
    if strict and not rep.ok:
        raise BudgetViolation(
            f"{over} budget, {lex} lexicographic, {stuck} stuck, {mism} alpha failures")
    return rep


# --------------------------------------------------------------------------
# dyadic pairs inside K2

@dataclass(frozen=True)
class DyadicReport:
    pairs: list[np.ndarray] = field(repr=False)   # I_i as (m, 2) arrays of (u, v)
    sizes: list[int]
    bounds: list[float]                           # 3 eps^2 n / 2^i
    within_bound: bool
    i0_in_k2: bool
    greedy_ok: bool
    max_distance: int

    def as_dict(self) -> dict:
        return {"sizes": self.sizes, "bounds": self.bounds, "within_bound": self.within_bound,
                "i0_in_k2": self.i0_in_k2, "greedy_ok": self.greedy_ok,
                "max_distance": self.max_distance}


def _v2(d: np.ndarray) -> np.ndarray:
    return np.log2(d & -d).astype(np.int64)


def dyadic_k2_pairs(gs) -> DyadicReport:
    """``I_i`` pairs: each ``K2`` vertex at distance ``D`` from ``K1`` with ``2^i || D``
    is paired with a vertex ``2^i`` closer to ``K1`` (lowest id at every step)."""
    k2 = gs.k2_graph()
    n2 = k2.vertex_count
    dist = bfs_distances(k2, np.arange(gs.kernel_count)).dist
    dmax = int(dist.max()) if n2 else 0
    # next hop toward K1: lowest-id neighbour one closer
    nxt = np.full(n2, -1, dtype=np.int64)
    src = np.repeat(np.arange(n2), np.diff(k2.indptr))
    dst = k2.indices
    step = dist[dst] == dist[src] - 1
    cand = np.full(n2, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(cand, src[step], dst[step])
    has = cand < np.iinfo(np.int64).max
    nxt[has] = cand[has]

    v = np.flatnonzero(dist >= 1)
    lvl = _v2(dist[v])
    u = v.copy()
    hops = 1 << lvl
    for k in range(int(hops.max()) if len(v) else 0):
        move = hops > k
        u[move] = nxt[u[move]]
    top = int(lvl.max()) + 1 if len(v) else 0
    eps, n = gs.params.eps, gs.params.n
    pairs, sizes, bounds = [], [], []
    for i in range(top):
        sel = lvl == i
        pairs.append(np.column_stack([u[sel], v[sel]]))
        sizes.append(int(sel.sum()))
        bounds.append(3 * eps * eps * n / 2 ** i)
    within = all(s <= b for s, b in zip(sizes, bounds))
    i0_ok = True
    if top:
        keys = src * n2 + dst
        i0_ok = bool(np.isin(pairs[0][:, 0] * n2 + pairs[0][:, 1], keys).all())
    # greedy dyadic walk: the I-index strictly increases until K1
    greedy = True
    if len(v):
        partner = np.full(n2, -1, dtype=np.int64)
        level = np.full(n2, -1, dtype=np.int64)
        partner[v], level[v] = u, lvl
        cur, last = v.copy(), np.full(len(v), -1, dtype=np.int64)
        while len(cur):
            lv = level[cur]
            if (lv <= last).any() or (dist[partner[cur]] != dist[cur] - (1 << lv)).any():
                greedy = False
                break
            cur, last = partner[cur], lv
            keep = dist[cur] > 0
            cur, last = cur[keep], last[keep]
    return DyadicReport(pairs, sizes, bounds, within, i0_ok, greedy, dmax)


# --------------------------------------------------------------------------
# numeric bound evaluators

@dataclass(frozen=True)
class BoundValues:
    delta: float
    T_delta: float
    k2_sum: float            # sum_i sqrt(2^i ln(3 eps^2 n / 2^i)), i = 0..floor(log2(2 ln N / eps))
    k2_bound: float          # sqrt(2) * k2_sum
    k2_terms: int
    tree_sum: float          # sum_{i<=l0} (l0-i+1) sqrt(2^i) sqrt(2 ln(eps n / 4^i))
    tree_tail_ratio: float   # full tree_sum / its last 10 terms
    k2_tail_ratio: float
    lower_value: float       # sqrt(2 gamma (1-gamma)) ln N / sqrt(eps)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _tail_ratio(terms: np.ndarray, tail: int = 10) -> float:
    return float(terms.sum() / terms[-tail:].sum()) if len(terms) else float("nan")


def bound_evaluators(params, gamma: float = 0.5) -> BoundValues:
    N = params.N
    if N <= math.e:
        raise ValueError("bound evaluators need N > e")
    eps, n = params.eps, params.n
    lnN = math.log(N)
    delta = lnN ** (-1.0 / 3.0)
    T = math.exp(delta) * lnN / math.sqrt(2 * eps)
    top = int(math.floor(math.log2(2 * lnN / eps)))
    i = np.arange(top + 1)
    arg = 3 * eps * eps * n / 2.0 ** i
    k2_terms = np.sqrt(2.0 ** i * np.log(np.maximum(arg, 1.0)))
    l0 = kappa_of(eps).bit_length() - 1
    j = np.arange(l0 + 1)
    arg2 = eps * n / 4.0 ** j
    tree_terms = (l0 - j + 1) * np.sqrt(2.0 ** j) * np.sqrt(2 * np.log(np.maximum(arg2, 1.0)))
    return BoundValues(
        delta=delta, T_delta=T,
        k2_sum=float(k2_terms.sum()), k2_bound=math.sqrt(2) * float(k2_terms.sum()),
        k2_terms=len(k2_terms),
        tree_sum=float(tree_terms.sum()), tree_tail_ratio=_tail_ratio(tree_terms),
        k2_tail_ratio=_tail_ratio(k2_terms),
        lower_value=math.sqrt(2 * gamma * (1 - gamma)) * lnN / math.sqrt(eps),
    )


# --------------------------------------------------------------------------
# u(v) versus alpha(v) diagnostic

def nearest_u_diagnostic(h: SkeletonHierarchy, eta: np.ndarray) -> dict:
    """How often the nearest ``U`` vertex on the ancestor line differs from ``alpha(v)``,
    and the largest ``|eta_v - eta_u(v)|`` against ``|eta_v - eta_alpha(v)|``."""
    tree = np.flatnonzero(h.psi >= 0)
    inU = np.zeros(h.n, dtype=bool)
    for u in h.U:
        inU[u] = True
    cur = h.alpha[tree].copy()
    for _ in range(int(h.depth.max()) // h.kappa + 1 if h.n else 0):
        miss = (cur >= 0) & ~inU[np.maximum(cur, 0)]
        if not miss.any():
            break
        cur[miss] = h.alpha[cur[miss]]
    ok = cur >= 0
    du = np.abs(eta[tree[ok]] - eta[cur[ok]])
    da = np.abs(eta[tree] - eta[h.alpha[tree]])
    return {
        "differs": int((cur != h.alpha[tree]).sum()),
        "max_to_u": float(du.max()) if len(du) else 0.0,
        "max_to_alpha": float(da.max()) if len(da) else 0.0,
    }
