"""Poisson Galton-Watson trees: sampling, exact survival curve, depth census."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GammaOutOfRange, MuOutOfRange


@dataclass(frozen=True)
class SurvivalCurve:
    """``p[k] = Pr(generation k of a PGW(mu) tree is non-empty)``."""

    mu: float
    p: np.ndarray

    def __getitem__(self, k):
        return self.p[k]

    def __len__(self) -> int:
        return len(self.p)


def survival_prob_exact(mu: float, k_max: int) -> SurvivalCurve:
    """Iterate ``p[k] = 1 - exp(-mu * p[k-1])`` from ``p[0] = 1``.

    A PGW(mu) root has Poisson(mu) children; the tree reaches depth ``k``
    iff some child's subtree reaches depth ``k - 1``, and thinning the
    Poisson count by the survival probability gives the recursion.
    """
    if not 0.0 <= mu < 1.0:
        raise MuOutOfRange(f"mu must lie in [0, 1), got {mu}")
    p = np.empty(k_max + 1)
    p[0] = 1.0
    for k in range(1, k_max + 1):
        p[k] = -math.expm1(-mu * p[k - 1])
    return SurvivalCurve(mu, p)


@dataclass(frozen=True)
class Forest:
    """Several PGW trees grown together, vertices stored generation by generation.

    ``parent[i]`` is the index of the parent of vertex ``i`` (``-1`` for
    roots), ``tree[i]`` the index of the tree it belongs to. Roots occupy
    indices ``0..count-1`` in order.
    """

    parent: np.ndarray
    depth: np.ndarray
    tree: np.ndarray
    count: int
    truncated: np.ndarray  # per tree: hit the depth cap with live frontier

    @property
    def size(self) -> int:
        return len(self.parent)

    def tree_depths(self) -> np.ndarray:
        out = np.zeros(self.count, dtype=np.int64)
        np.maximum.at(out, self.tree, self.depth)
        return out

    def tree_sizes(self) -> np.ndarray:
        return np.bincount(self.tree, minlength=self.count)


def grow_forest(mu: float, roots: int, depth_cap: int, rng: np.random.Generator) -> Forest:
    """Grow ``roots`` independent PGW(mu) trees breadth first.

    Each generation draws all Poisson(mu) offspring counts in one call, so
    the draw order (and hence the output for a given generator state) is
    fixed by the generation structure alone. Growth stops at ``depth_cap``;
    trees with children still pending at the cap are flagged truncated.
    """
    if not 0.0 <= mu < 1.0:
        raise MuOutOfRange(f"mu must lie in [0, 1), got {mu}")
    if depth_cap < 1:
        raise ValueError("depth_cap must be at least 1")
    parents = [np.full(roots, -1, dtype=np.int64)]
    depths = [np.zeros(roots, dtype=np.int64)]
    trees = [np.arange(roots, dtype=np.int64)]
    truncated = np.zeros(roots, dtype=bool)
    frontier = np.arange(roots, dtype=np.int64)
    frontier_tree = trees[0]
    total = roots
    depth = 0
    while len(frontier):
        kids = rng.poisson(mu, size=len(frontier)) if mu > 0 else np.zeros(len(frontier), np.int64)
        if depth == depth_cap:
            truncated[np.unique(frontier_tree[kids > 0])] = True
            break
        depth += 1
        par = np.repeat(frontier, kids)
        new_tree = np.repeat(frontier_tree, kids)
        ids = np.arange(total, total + len(par), dtype=np.int64)
        total += len(par)
        parents.append(par)
        depths.append(np.full(len(par), depth, dtype=np.int64))
        trees.append(new_tree)
        frontier, frontier_tree = ids, new_tree
    return Forest(
        parent=np.concatenate(parents),
        depth=np.concatenate(depths),
        tree=np.concatenate(trees),
        count=roots,
        truncated=truncated,
    )


@dataclass(frozen=True)
class GwTree:
    parent: np.ndarray
    depth: np.ndarray
    truncated: bool

    @property
    def size(self) -> int:
        return len(self.parent)

    @property
    def depth_max(self) -> int:
        return int(self.depth.max())


def sample_pgw_tree(mu: float, depth_cap: int, rng: np.random.Generator) -> GwTree:
    """One PGW(mu) tree, truncated at ``depth_cap`` generations."""
    f = grow_forest(mu, 1, depth_cap, rng)
    return GwTree(f.parent, f.depth, bool(f.truncated[0]))


# --------------------------------------------------------------------------
# depth census over the trees of a giant sample

DEFAULT_C1 = 0.1
DEFAULT_C2 = 10.0
DEFAULT_C_EPS = 2.0


@dataclass(frozen=True)
class DepthCensus:
    gamma: float
    threshold: int          # floor(gamma * ln(N) / eps)
    count: int              # trees with depth >= threshold
    trees: int              # number of trees (= |V(K2)|)
    max_depth: int
    deep_limit: float       # 2 ln(N) / eps
    over_deep_limit: int    # trees deeper than deep_limit
    band: tuple[float, float]
    log_n: float            # ln(N)

    @property
    def exponent(self) -> float:
        """``ln(count) / ln(N)``; ``nan`` when the count is zero."""
        return math.log(self.count) / self.log_n if self.count > 0 else float("nan")


def depth_census(
    gs,
    gamma: float,
    *,
    c1: float = DEFAULT_C1,
    c2: float = DEFAULT_C2,
    c_eps: float = DEFAULT_C_EPS,
) -> DepthCensus:
    """Count attached trees of depth at least ``floor(gamma * ln N / eps)``.

    The reported band ``[c1/2 * N**(1-gamma-C*eps), 2*c2 * N**(1-gamma+C*eps)]``
    uses configured constants; it is informational only since the true
    constants are unknown.
    """
    if not 0.0 < gamma < 1.0:
        raise GammaOutOfRange(f"gamma must lie in (0, 1), got {gamma}")
    eps = gs.params.eps
    log_n = math.log(gs.params.N)
    threshold = int(math.floor(gamma * log_n / eps))
    depths = gs.tree_depths()
    deep_limit = 2.0 * log_n / eps
    band = (
        0.5 * c1 * gs.params.N ** (1 - gamma - c_eps * eps),
        2.0 * c2 * gs.params.N ** (1 - gamma + c_eps * eps),
    )
    return DepthCensus(
        gamma=gamma,
        threshold=threshold,
        count=int((depths >= threshold).sum()),
        trees=len(depths),
        max_depth=int(depths.max()) if len(depths) else 0,
        deep_limit=deep_limit,
        over_deep_limit=int((depths > deep_limit).sum()),
        band=band,
        log_n=log_n,
    )
