import math

import numpy as np
import pytest

from giantwalk.errors import GammaOutOfRange, MuOutOfRange
from giantwalk.giant import ModelParams, sample_giant, solve_mu
from giantwalk.gw import depth_census, grow_forest, sample_pgw_tree, survival_prob_exact

from conftest import synthetic_sample, K4_EDGES


def test_survival_mu_zero():
    c = survival_prob_exact(0.0, 10)
    assert c[0] == 1.0
    assert np.all(c.p[1:] == 0.0)


def test_survival_closed_form():
    assert survival_prob_exact(0.9, 1)[1] == pytest.approx(1 - math.exp(-0.9), abs=1e-15)
    assert survival_prob_exact(0.9, 1)[1] == pytest.approx(0.59343, abs=1e-5)


def test_survival_fixed_point_and_monotone():
    mu = solve_mu(0.1)
    c = survival_prob_exact(mu, 400)
    k = np.arange(1, len(c))
    assert np.allclose(c.p[1:], -np.expm1(-mu * c.p[:-1]), rtol=1e-14, atol=0)
    assert np.all(np.diff(c.p) <= 0)
    assert np.all(c.p > 0)
    assert c[int(10 / (1 - mu))] < 0.05
    small = k < 1 / 0.1
    assert np.all(c.p[1:][small] < 10 / k[small])


def test_survival_rejects_bad_mu():
    with pytest.raises(MuOutOfRange):
        survival_prob_exact(1.0, 5)
    with pytest.raises(MuOutOfRange):
        survival_prob_exact(-0.1, 5)


def test_pgw_mu_zero():
    t = sample_pgw_tree(0.0, 10, np.random.default_rng(0))
    assert t.size == 1 and t.depth_max == 0 and not t.truncated


def test_tree_structure():
    t = sample_pgw_tree(0.95, 50, np.random.default_rng(4))
    assert t.depth[0] == 0
    child = np.arange(1, t.size)
    assert np.array_equal(t.depth[child], t.depth[t.parent[child]] + 1)


def test_truncation_flag():
    rng = np.random.default_rng(2)
    f = grow_forest(0.99, 2000, 3, rng)
    assert f.truncated.any()
    assert f.depth.max() <= 3


@pytest.mark.slow
def test_sampler_matches_recursion():
    """Pr(depth >= k) and mean size over 10^6 trees against the recursion and 1/(1-mu)."""
    mu, draws, kmax = 0.9, 1_000_000, 20
    f = grow_forest(mu, draws, 200, np.random.default_rng(11))
    depths = f.tree_depths()
    exact = survival_prob_exact(mu, kmax).p
    for k in range(kmax + 1):
        emp = (depths >= k).mean()
        se = math.sqrt(exact[k] * (1 - exact[k]) / draws)
        assert abs(emp - exact[k]) <= 3 * se + 1e-12, k
    sizes = f.tree_sizes()
    # Var of Borel-type total progeny: mu / (1 - mu)^3
    se = math.sqrt(mu / (1 - mu) ** 3 / draws)
    assert abs(sizes.mean() - 1 / (1 - mu)) <= 3 * se


def test_census_threshold_zero_counts_everything(giant_small):
    # gamma small enough that floor(gamma ln N / eps) = 0
    gamma = 0.5 * giant_small.params.eps / math.log(giant_small.params.N)
    c = depth_census(giant_small, gamma)
    assert c.threshold == 0
    assert c.count == giant_small.k2_count


def test_census_gamma_range(giant_small):
    for g in (0.0, 1.0, 1.5):
        with pytest.raises(GammaOutOfRange):
            depth_census(giant_small, g)


def test_census_on_synthetic_tree():
    gs = synthetic_sample(K4_EDGES, 4, [0, 4, 5, 1], 0.5, n=8000)  # N = 1000
    c = depth_census(gs, 0.2)
    assert c.threshold == math.floor(0.2 * math.log(1000) / 0.5)
    assert c.max_depth == 3
    assert c.count == int((gs.tree_depths() >= c.threshold).sum())


@pytest.fixture(scope="module")
def censuses():
    p = ModelParams.from_eps(1_000_000, 0.1)
    return p, [(gs.k2_count, depth_census(gs, 0.5))
               for gs in (sample_giant(p, seed) for seed in range(5))]


def test_census_count_matches_survival_curve(censuses):
    """Trees of depth >= floor(ln N / (2 eps)): count against |K2| p[threshold] (binomial SE)."""
    p, runs = censuses
    for k2, c in runs:
        q = survival_prob_exact(p.mu, c.threshold)[c.threshold]
        mean, sd = k2 * q, math.sqrt(k2 * q * (1 - q))
        assert abs(c.count - mean) <= 4 * sd
        assert c.over_deep_limit == 0
        assert c.max_depth <= c.deep_limit


@pytest.mark.xfail(strict=False, reason="exponent sits near 2/3 at eps=0.1, at the top edge of [0.3, 0.7]")
def test_census_exponent_literal_band(censuses):
    _, runs = censuses
    for _, c in runs:
        assert 0.3 <= c.exponent <= 0.7
