"""Graph Laplacians, effective resistance, hitting times and the commute identity.

Every solve works with the *grounded* Laplacian: the row and column of one
pin vertex are removed, leaving a symmetric positive definite matrix when
the graph is connected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import Disconnected, FactorizationFailed, SolveDiverged, TooLarge
from .graph import Graph, bfs_distances, is_connected

DENSE_LIMIT = 2000
HITTING_LIMIT = 10_000
DEFAULT_TOL = 1e-9


def laplacian(g: Graph) -> sp.csr_matrix:
    """``L = D - A`` as a CSR matrix."""
    a = g.to_scipy()
    return (sp.diags(g.degrees.astype(float)) - a).tocsr()


def grounded_laplacian(g: Graph, pin: int) -> sp.csc_matrix:
    keep = np.ones(g.vertex_count, dtype=bool)
    keep[pin] = False
    L = laplacian(g)
    return L[keep][:, keep].tocsc()


@numba.njit(cache=True)
def _upper_solve(indptr, indices, data, diag, rhs):
    """Solve ``U x = rhs`` in place for CSC upper-triangular ``U`` (columns of rhs batched)."""
    n = len(diag)
    for j in range(n - 1, -1, -1):
        for c in range(rhs.shape[1]):
            rhs[j, c] /= diag[j]
        for k in range(indptr[j], indptr[j + 1]):
            i = indices[k]
            if i < j:
                u = data[k]
                for c in range(rhs.shape[1]):
                    rhs[i, c] -= u * rhs[j, c]
    return rhs


@numba.njit(cache=True)
def _pair_resistances(indptr, indices, data, diag, pos, pairs):
    """``b^T L_g^{-1} b = |D^{-1/2} L^{-1} P b|^2`` for ``b = e_v - e_w``.

    ``L`` is unit lower triangular in CSC form; with a two-entry right-hand
    side the forward solve only touches the elimination-tree paths above
    the two nonzeros, so each pair costs far less than a full solve.
    """
    n = len(diag)
    out = np.zeros(len(pairs))
    y = np.zeros(n)
    for p in range(len(pairs)):
        a = pos[pairs[p, 0]]
        b = pos[pairs[p, 1]]
        if a == b:
            continue
        start = n
        if a >= 0:
            y[a] += 1.0
            start = min(start, a)
        if b >= 0:
            y[b] -= 1.0
            start = min(start, b)
        acc = 0.0
        for j in range(start, n):
            yj = y[j]
            if yj != 0.0:
                for k in range(indptr[j], indptr[j + 1]):
                    i = indices[k]
                    if i > j:
                        y[i] -= data[k] * yj
                acc += yj * yj / diag[j]
                y[j] = 0.0
        out[p] = acc
    return out


class LaplacianFactor:
    """Sparse ``L_g = P^T L D L^T P`` factorisation of a grounded Laplacian.

    SuperLU is run with diagonal pivoting and a symmetric fill-reducing
    ordering, so its row and column permutations coincide and ``U = D L^T``.
    That gives both fast solves and exact Gaussian sampling with covariance
    ``L_g^{-1}``: ``x = P^T U^{-1} D^{1/2} z``.
    """

    def __init__(self, g: Graph, pin: int = 0):
        if not is_connected(g):
            raise FactorizationFailed("grounded Laplacian is singular: graph is disconnected")
        self.graph = g
        self.pin = int(pin)
        self.n = g.vertex_count
        keep = np.ones(self.n, dtype=bool)
        keep[self.pin] = False
        self.free = np.flatnonzero(keep)
        self.index = np.full(self.n, -1, dtype=np.int64)
        self.index[self.free] = np.arange(len(self.free))
        if len(self.free) == 0:
            self._lu = None
            return
        Lg = grounded_laplacian(g, self.pin)
        try:
            lu = spla.splu(Lg, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise FactorizationFailed(str(exc)) from None
        if not np.array_equal(lu.perm_r, lu.perm_c):
            raise FactorizationFailed("row and column orderings differ")
        U = lu.U.tocsc()
        U.sort_indices()
        diag = U.diagonal()
        if not (diag > 0).all():
            raise FactorizationFailed("non-positive pivot")
        self._lu = lu
        self._perm = lu.perm_c
        self._U = (U.indptr.astype(np.int64), U.indices.astype(np.int64), U.data, diag)
        L = lu.L.tocsc()
        self._L = (L.indptr.astype(np.int64), L.indices.astype(np.int64), L.data)
        # position of each vertex in the eliminated ordering (-1 for the pin)
        self._pos = np.full(self.n, -1, dtype=np.int64)
        self._pos[self.free] = self._perm
        self._sqrt_d = np.sqrt(diag)

    @property
    def nnz(self) -> int:
        return 0 if self._lu is None else self._lu.L.nnz + self._lu.U.nnz

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve the grounded system for a full-length right-hand side.

        Entries of ``b`` at the pin are ignored; the solution is zero there.
        """
        b = np.asarray(b, dtype=float)
        x = np.zeros(b.shape)
        if self._lu is not None:
            x[self.free] = self._lu.solve(b[self.free])
        return x

    def resistance(self, v: int, w: int) -> float:
        if v == w:
            return 0.0
        return float(self.resistances([(v, w)])[0])

    def resistances(self, pairs) -> np.ndarray:
        """``R_eff`` for an array of ``(v, w)`` pairs."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if self._lu is None:
            return np.zeros(len(pairs))
        indptr, indices, data = self._L
        return _pair_resistances(indptr, indices, data, self._U[3], self._pos, pairs)

    def resistances_to_pin(self, vertices) -> np.ndarray:
        """``R_eff(v, pin)``, i.e. the diagonal of ``L_g^{-1}``, for each vertex."""
        vertices = np.asarray(vertices, dtype=np.int64)
        pairs = np.column_stack([vertices, np.full(len(vertices), self.pin)])
        return self.resistances(pairs)

    def sample(self, z: np.ndarray) -> np.ndarray:
        """Map standard normals ``z`` of shape ``(n-1, r)`` to ``r`` fields of length ``n``.

        Columns of the result are centred Gaussian vectors with covariance
        ``L_g^{-1}`` on the free vertices and exactly zero at the pin.
        """
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            return self.sample(z[:, None])[:, 0]
        out = np.zeros((self.n, z.shape[1]))
        if self._lu is None:
            return out
        y = np.ascontiguousarray(z * self._sqrt_d[:, None])
        indptr, indices, data, diag = self._U
        _upper_solve(indptr, indices, data, diag, y)
        # y lives in the permuted ordering: free vertex i sits at row perm[i]
        out[self.free] = y[self._perm]
        return out


# --------------------------------------------------------------------------
# effective resistance

def _dense_grounded_solve(g: Graph, pin: int, b: np.ndarray) -> np.ndarray:
    Lg = grounded_laplacian(g, pin).toarray()
    keep = np.ones(g.vertex_count, dtype=bool)
    keep[pin] = False
    x = np.zeros(g.vertex_count)
    if keep.any():
        try:
            c = sla.cho_factor(Lg)
        except np.linalg.LinAlgError:
            raise Disconnected("grounded Laplacian is not positive definite") from None
        x[keep] = sla.cho_solve(c, b[keep])
    return x


def _pcg_grounded_solve(g: Graph, pin: int, b: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    Lg = grounded_laplacian(g, pin).tocsr()
    keep = np.ones(g.vertex_count, dtype=bool)
    keep[pin] = False
    rhs = b[keep]
    dinv = 1.0 / Lg.diagonal()
    M = spla.LinearOperator(Lg.shape, matvec=lambda r: dinv * r)
    maxiter = max(10, int(10 * math.sqrt(g.vertex_count)))
    sol, info = spla.cg(Lg, rhs, rtol=tol, atol=0.0, maxiter=maxiter, M=M)
    resid = float(np.linalg.norm(Lg @ sol - rhs) / np.linalg.norm(rhs))
    if info != 0 or resid > 10 * tol:
        raise SolveDiverged(
            f"PCG did not reach relative residual {tol:g} in {maxiter} iterations "
            f"(residual {resid:.3g})")
    x = np.zeros(g.vertex_count)
    x[keep] = sol
    return x, resid


@dataclass(frozen=True)
class ResistanceResult:
    v: int
    w: int
    value: float
    residual: float
    method: str


def effective_resistance(g: Graph, v: int, w: int, tol: float = DEFAULT_TOL,
                         method: str = "auto") -> float:
    """``R_eff(v, w)`` for unit resistors on every edge."""
    return resistance_solve(g, v, w, tol, method).value


def resistance_solve(g: Graph, v: int, w: int, tol: float = DEFAULT_TOL,
                     method: str = "auto") -> ResistanceResult:
    """Solve ``L_g x = e_v - e_w`` grounded at ``w`` and report ``x_v``.

    ``method`` is ``"direct"`` (dense Cholesky), ``"iterative"`` (Jacobi
    preconditioned CG) or ``"auto"``, which goes direct below 2000 vertices.
    """
    v, w = int(v), int(w)
    if v == w:
        return ResistanceResult(v, w, 0.0, 0.0, "trivial")
    if not is_connected(g):
        raise Disconnected("effective resistance needs a connected graph")
    if method == "auto":
        method = "direct" if g.vertex_count < DENSE_LIMIT else "iterative"
    b = np.zeros(g.vertex_count)
    b[v] = 1.0
    if method == "direct":
        x = _dense_grounded_solve(g, w, b)
        Lg = grounded_laplacian(g, w)
        keep = np.arange(g.vertex_count) != w
        resid = float(np.linalg.norm(Lg @ x[keep] - b[keep]))
    elif method == "iterative":
        x, resid = _pcg_grounded_solve(g, w, b, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    if resid > max(tol, 1e-9) * 10:
        raise SolveDiverged(f"residual {resid:.3g} above tolerance")
    return ResistanceResult(v, w, float(x[v]), resid, method)


def resistance_matrix_pinv(g: Graph) -> np.ndarray:
    """All-pairs ``R_eff`` from the Laplacian pseudoinverse (small graphs only)."""
    Lp = np.linalg.pinv(laplacian(g).toarray())
    d = np.diag(Lp)
    return d[:, None] + d[None, :] - 2 * Lp


# --------------------------------------------------------------------------
# hitting times and commute identity

def hitting_times_exact(g: Graph, target: int) -> np.ndarray:
    """Expected hitting times ``tau(v, target)`` for the simple random walk.

    Solves the first-step equations ``h(v) = 1 + mean_{u ~ v} h(u)``,
    ``h(target) = 0`` with a sparse direct solver on ``I - P``.
    """
    n = g.vertex_count
    if n > HITTING_LIMIT:
        raise TooLarge(f"hitting_times_exact is limited to {HITTING_LIMIT} vertices")
    if not is_connected(g):
        raise Disconnected("hitting times are infinite on a disconnected graph")
    h = np.zeros(n)
    if n == 1:
        return h
    A = g.to_scipy()
    P = sp.diags(1.0 / g.degrees) @ A
    keep = np.ones(n, dtype=bool)
    keep[target] = False
    M = (sp.identity(n - 1) - P[keep][:, keep]).tocsc()
    sol = spla.spsolve(M, np.ones(n - 1))
    resid = np.abs(M @ sol - 1.0).max()
    if resid > 1e-9 * max(1.0, np.abs(sol).max()):
        raise SolveDiverged(f"hitting-time residual {resid:.3g}")
    h[keep] = sol
    return h


@dataclass(frozen=True)
class CommuteCheck:
    v: int
    w: int
    commute_time: float     # tau(v,w) + tau(w,v)
    edges: int
    resistance: float
    residual: float         # |commute - 2|E| R| / (2|E| R), the standard identity
    literal_residual: float  # same with |E| in place of 2|E|

    @property
    def ok(self) -> bool:
        return self.residual < 1e-6


def commute_identity_check(g: Graph, v: int, w: int, convention: str = "standard") -> CommuteCheck:
    """Compare ``tau(v,w) + tau(w,v)`` with ``2 |E| R_eff(v, w)``.

    Both conventions are reported; ``convention="literal"`` swaps which one
    feeds :attr:`CommuteCheck.residual` (the single-``|E|`` form fails on
    every non-trivial graph and exists for fault-injection runs).
    """
    commute = hitting_times_exact(g, w)[v] + hitting_times_exact(g, v)[w]
    R = effective_resistance(g, v, w)
    m = g.edge_count
    standard = 2 * m * R
    literal = m * R

    def rel(pred):
        if pred == 0:
            return abs(commute)
        return abs(commute - pred) / pred

    res_std, res_lit = rel(standard), rel(literal)
    if convention == "literal":
        res_std, res_lit = res_lit, res_std
    elif convention != "standard":
        raise ValueError(f"unknown convention {convention!r}")
    return CommuteCheck(int(v), int(w), float(commute), m, R, res_std, res_lit)


# --------------------------------------------------------------------------
# maximum resistance on a giant sample

@dataclass(frozen=True)
class MaxResistanceEstimate:
    k2_max: float
    h_max: float
    k2_scaled: float        # k2_max * eps
    h_scaled: float         # h_max * eps / ln N
    pairs_checked: int
    distance_violations: int  # pairs with R_eff > hop distance (must be 0)
    k2_pair: tuple[int, int]
    h_pair: tuple[int, int]


def _far_pair(g: Graph) -> tuple[int, int]:
    d = bfs_distances(g, [0]).dist
    a = int(np.argmax(d))
    d = bfs_distances(g, [a]).dist
    return a, int(np.argmax(d))


def max_resistance_estimate(gs, pair_budget: int, rng: np.random.Generator) -> MaxResistanceEstimate:
    """Largest ``R_eff`` over random pairs plus a double-sweep far pair.

    Done separately on ``K2`` and on ``H``; every examined pair is also
    checked against ``R_eff <= dist``.
    """
    eps, N = gs.params.eps, gs.params.N
    results = {}
    violations = 0
    checked = 0
    for name, g in (("k2", gs.k2_graph()), ("h", gs.graph)):
        fac = LaplacianFactor(g, 0)
        n = g.vertex_count
        pairs = np.array([_far_pair(g)] + rng.integers(0, n, size=(pair_budget, 2)).tolist(),
                         dtype=np.int64).reshape(-1, 2)
        reff = fac.resistances(pairs)
        order = np.argsort(pairs[:, 0], kind="stable")
        src_prev, dist = -1, None
        for k in order:
            a, b = pairs[k]
            if a != src_prev:
                dist = bfs_distances(g, [a]).dist
                src_prev = a
            checked += 1
            if reff[k] > dist[b] + 1e-9:
                violations += 1
        top = int(np.argmax(reff))
        best, best_pair = float(reff[top]), (int(pairs[top, 0]), int(pairs[top, 1]))
        results[name] = (best, best_pair)
    k2_max, k2_pair = results["k2"]
    h_max, h_pair = results["h"]
    return MaxResistanceEstimate(
        k2_max=k2_max,
        h_max=h_max,
        k2_scaled=k2_max * eps,
        h_scaled=h_max * eps / math.log(N),
        pairs_checked=checked,
        distance_violations=violations,
        k2_pair=k2_pair,
        h_pair=h_pair,
    )
