import math
from types import SimpleNamespace

import mpmath
import numpy as np
import pytest

from giantwalk.errors import BudgetViolation, MissingProvenance
from giantwalk.giant import ModelParams, sample_giant
from giantwalk.graph import bfs_distances
from giantwalk.skeleton import (
    all_chains, ancestor, bound_evaluators, budget, build_hierarchy, chain_decompose,
    dyadic_k2_pairs, kappa_of, nearest_u_diagnostic, validate_properties, verify_budgets,
)

from conftest import K4_EDGES, synthetic_sample


@pytest.mark.parametrize("eps, kappa", [(0.6, 2), (0.5, 2), (0.3, 4), (0.1, 16), (0.0625, 16), (0.06, 32)])
def test_kappa(eps, kappa):
    assert kappa_of(eps) == kappa
    assert kappa >= 1 / eps > kappa / 2


def test_budget_formula():
    assert budget(1).tolist() == [3, 1]
    assert budget(4).tolist() == [9, 7, 5, 3, 1]


def test_no_trees_is_vacuous():
    gs = synthetic_sample(K4_EDGES, 4, [], 0.1)
    h = build_hierarchy(gs)
    assert all(len(j) == 0 for j in h.J)
    assert all(len(u) == 0 for u in h.U[1:])
    for k in (1, 2, 4, 8, 16):
        assert h.W(k).tolist() == [0, 1, 2, 3]
    rep = verify_budgets(h)
    assert rep.ok and rep.budget_violations == 0
    assert all(s == 0 for s in rep.J_sizes)
    assert validate_properties(h, gs).ok


def test_synthetic_path_tree(path_tree_sample):
    h = build_hierarchy(path_tree_sample)
    assert (h.kappa, h.l0) == (2, 1)
    assert sorted(h.depth[h.W(2)].tolist()) == [0, 0, 0, 0, 2, 4]
    assert h.W(2).tolist() == [0, 1, 2, 3, 5, 7]
    assert sorted(map(tuple, h.J[0].tolist())) == [(0, 4), (4, 5), (5, 6), (6, 7)]
    assert sorted(map(tuple, h.J[1].tolist())) == [(0, 5), (5, 7)]
    assert validate_properties(h, path_tree_sample).ok

    c = chain_decompose(h, 6)              # the depth-3 vertex
    assert h.alpha[6] == 5
    assert c.chain.tolist() == [6, 5]
    assert c.counts.tolist() == [1, 0]
    assert c.within_budget(h.l0)
    assert budget(h.l0)[0] == 3

    c = chain_decompose(h, 5)              # depth kappa, second coordinate of J_1
    assert c.chain.tolist() == [5, 0]
    assert c.link_levels.tolist() == [1]

    assert chain_decompose(h, 2).chain.tolist() == [2]


def test_branching_synthetic():
    # two branches under vertex 0, one of depth 3 and one of depth 2
    gs = synthetic_sample(K4_EDGES, 4, [0, 4, 5, 0, 7, 4], 0.3)
    h = build_hierarchy(gs)
    assert h.kappa == 4
    assert validate_properties(h, gs).ok
    rep = verify_budgets(h)
    assert rep.ok


def test_missing_provenance(giant_small):
    bare = SimpleNamespace(graph=giant_small.graph, params=giant_small.params, parent=None, depth=None)
    with pytest.raises(MissingProvenance):
        build_hierarchy(bare)


def test_descendant_lowest_id(path_tree_sample):
    h = build_hierarchy(path_tree_sample)
    assert h.descendant(0, 2) == 5
    assert h.descendant(0, 4) == 7
    assert h.descendant(6, 2) == -1


@pytest.fixture(scope="module")
def h1000(giant_1000):
    return build_hierarchy(giant_1000)


def test_sampled_hierarchy_properties(giant_1000, h1000):
    rep = validate_properties(h1000, giant_1000)
    assert rep.ok, rep


def test_alpha_matches_parent_walk(giant_1000, h1000):
    h = h1000
    rng = np.random.default_rng(0)
    for v in rng.choice(np.flatnonzero(h.depth > 0), size=300, replace=False):
        cur = giant_1000.parent[v]
        while giant_1000.depth[cur] % h.kappa:
            cur = giant_1000.parent[cur]
        assert h.alpha[v] == cur
        d = giant_1000.depth[v]
        assert ancestor(h.parent, np.array([v]), (d - 1) % h.kappa + 1)[0] == cur


def test_every_chain_within_budget(h1000):
    rep = verify_budgets(h1000)
    assert rep.budget_violations == 0 and rep.lex_violations == 0
    assert rep.stuck == 0 and rep.alpha_mismatch == 0
    assert all(m <= b for m, b in zip(rep.max_counts, rep.budget))
    ch = all_chains(h1000)
    tree = np.flatnonzero(h1000.psi >= 0)
    assert np.array_equal(ch.ends[tree], h1000.alpha[tree])


def test_chain_sample_lexicographic(h1000):
    rng = np.random.default_rng(3)
    for v in rng.choice(np.flatnonzero(h1000.psi >= 0), size=200, replace=False):
        c = chain_decompose(h1000, int(v))
        # resume points: one step on when psi == phi, two (through z) otherwise
        resume, k = [], 0
        while k < len(c.chain) - 1:
            x = c.chain[k]
            resume.append(x)
            k += 1 if h1000.psi[x] == h1000.phi[x] else 2
        assert k == len(c.chain) - 1
        key = [(h1000.phi[x], h1000.psi[x]) for x in resume]
        assert all(a < b for a, b in zip(key, key[1:]))
        for lvl, (x, y) in zip(c.link_levels, zip(c.chain[:-1], c.chain[1:])):
            assert h1000.first[lvl][x] == y or h1000.first[lvl][y] == x


def test_budget_violation_is_raised(path_tree_sample):
    h = build_hierarchy(path_tree_sample)
    h.first[1][7] = -1      # break the J_1 link at the deepest vertex
    with pytest.raises(BudgetViolation):
        verify_budgets(h)
    assert not verify_budgets(h, strict=False).ok


def test_dyadic_pairs(giant_1000):
    rep = dyadic_k2_pairs(giant_1000)
    assert rep.within_bound and rep.i0_in_k2 and rep.greedy_ok
    k2 = giant_1000.k2_graph()
    dist = bfs_distances(k2, giant_1000.kernel_vertices).dist
    for i, pairs in enumerate(rep.pairs):
        if not len(pairs):
            continue
        u, v = pairs[:, 0], pairs[:, 1]
        assert np.all((dist[v] >> i) & 1 == 1) and np.all(dist[v] % (1 << i) == 0)
        assert np.all(dist[u] == dist[v] - (1 << i))
        for a, b in pairs[:5]:
            assert bfs_distances(k2, [a]).dist[b] == 1 << i
    # D = 1 lands in I_0 as a K2 edge; D = 4 lands in I_2 with its partner in K1
    d1 = rep.pairs[0][dist[rep.pairs[0][:, 1]] == 1]
    assert len(d1) and all(b in k2.neighbors(a) for a, b in d1)
    d4 = rep.pairs[2][dist[rep.pairs[2][:, 1]] == 4]
    assert len(d4) and np.all(d4[:, 0] < giant_1000.kernel_count)


def test_bound_values_against_mpmath():
    p = ModelParams.from_eps(1_000_000, 0.1)
    b = bound_evaluators(p)
    mpmath.mp.dps = 40
    lnN = mpmath.log(mpmath.mpf(1000))
    T = mpmath.e ** (lnN ** (-mpmath.mpf(1) / 3)) * lnN / mpmath.sqrt(mpmath.mpf("0.2"))
    assert b.T_delta == pytest.approx(float(T), rel=1e-13)
    assert b.T_delta == pytest.approx(26.113, abs=1e-3)
    assert b.delta == pytest.approx(float(lnN ** (-mpmath.mpf(1) / 3)), rel=1e-14)
    assert b.lower_value == pytest.approx(math.log(1000) / math.sqrt(0.2), rel=1e-14)
    top = int(mpmath.floor(mpmath.log(2 * lnN / mpmath.mpf("0.1"), 2)))
    s = mpmath.fsum(mpmath.sqrt(2 ** i * mpmath.log(3 * mpmath.mpf("0.01") * 10 ** 6 / 2 ** i))
                    for i in range(top + 1))
    assert b.k2_sum == pytest.approx(float(s), rel=1e-12)
    assert b.k2_tail_ratio < 1.5
    with pytest.raises(ValueError):
        bound_evaluators(ModelParams.from_eps(1000, 0.1))


def test_nearest_u_diagnostic(h1000, giant_1000):
    rng = np.random.default_rng(0)
    eta = rng.standard_normal(h1000.n)
    d = nearest_u_diagnostic(h1000, eta)
    assert d["differs"] >= 0 and d["max_to_u"] >= 0 and d["max_to_alpha"] >= 0


@pytest.mark.slow
def test_twenty_seeds_budgets_slopes_and_dyadic_bounds():
    p = ModelParams.from_eps(1_000_000, 0.1)
    lo, hi = -2.4 * math.log(2), -1.6 * math.log(2)
    for seed in range(20):
        gs = sample_giant(p, 100 + seed)
        h = build_hierarchy(gs)
        rep = verify_budgets(h)
        assert rep.budget_violations == 0
        assert lo <= rep.J_slope <= hi, (seed, rep.J_slope)
        assert validate_properties(h, gs).ok
        assert dyadic_k2_pairs(gs).within_bound
