# coding: utf-8

# # Sampling a near-critical giant
#
# The giant is built in three layers: a kernel (multigraph on the degree >= 3
# vertices), a subdivision of every kernel edge into a path of geometric length,
# and a Poisson-Galton-Watson tree hanging off every vertex of that subdivided
# graph. Here we build one at eps = 0.1 and compare the layer sizes with what the
# model predicts.

# In[1]:

import numpy as np

from giantwalk.giant import ModelParams, apoh_report, expected_counts, sample_giant
from giantwalk.gw import survival_prob_exact

p = ModelParams.from_eps(1_000_000, 0.1)
p


# mu is the conjugate of 1 + eps, i.e. the other root of mu e^{-mu} = (1+eps) e^{-(1+eps)}.
# It sets the mean offspring of the attached trees.

# In[2]:

print("mu =", p.mu, " 1 - mu =", 1 - p.mu)


# In[3]:

gs = sample_giant(p, seed=1)
print(gs.graph.vertex_count, "vertices,", gs.graph.edge_count, "edges")
print("kernel:", gs.kernel_count, " K2:", gs.k2_count)


# Counts against the finite-eps expectations (not the leading-order ones, which are
# noticeably off at eps = 0.1):

# In[4]:

rep = apoh_report(gs)
exp = expected_counts(p)
for key, c in rep.counts.items():
    print(f"{key:10s} {c:8d}   expected {exp.get(key, float('nan')):10.1f}   ratio {rep.ratios.get(key, float('nan')):.3f}")


# ## Tree depths
#
# The number of trees reaching depth k should be about |K2| times the survival
# probability p[k]. Compare at a few depths.

# In[5]:

surv = survival_prob_exact(p.mu, 60)
roots = np.flatnonzero(gs.depth == 0)
height = np.zeros(gs.graph.vertex_count, dtype=int)
# height of the tree above each root = deepest descendant; walk down by depth
for v in np.argsort(gs.depth)[::-1]:
    if gs.depth[v] > 0:
        u = gs.parent[v]
        height[u] = max(height[u], height[v] + 1)
for k in (1, 5, 10, 20, 34):
    print(k, int(np.sum(height[roots] >= k)), round(gs.k2_count * surv[k], 1))


# The census at gamma = 1/2 counts trees deeper than ln N / (2 eps):

# In[6]:

c = rep.census
print("threshold", c.threshold, "count", c.count, "exponent", round(c.exponent, 3))
print("max depth", c.max_depth, "limit", round(c.deep_limit, 1))
