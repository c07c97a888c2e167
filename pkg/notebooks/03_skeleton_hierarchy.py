# coding: utf-8

# # The chaining hierarchy on the tree layer
#
# Trees are cut every kappa levels (kappa the power of two just above 1/eps);
# each tree vertex is linked to its cut-level ancestor alpha(v) by a chain whose
# links live on dyadic levels J_i. We build it, walk a few chains and check that
# every chain stays inside its per-level budget.

# In[1]:

import numpy as np

from giantwalk.giant import ModelParams, sample_giant
from giantwalk.skeleton import (
    budget, build_hierarchy, chain_decompose, dyadic_k2_pairs, validate_properties,
    verify_budgets,
)

gs = sample_giant(ModelParams.from_eps(1_000_000, 0.1), seed=1)
h = build_hierarchy(gs)
print("kappa", h.kappa, "l0", h.l0, "budget", budget(h.l0))


# In[2]:

print(validate_properties(h, gs))
rep = verify_budgets(h)
print("violations", rep.budget_violations, "max counts", rep.max_counts)
print("|J_i|", rep.J_sizes, "slope", rep.J_slope, "target", rep.J_slope_target)


# A few chains, deepest vertex first:

# In[3]:

for v in [int(np.argmax(gs.depth))] + list(np.random.default_rng(2).choice(np.flatnonzero(h.psi >= 0), 3)):
    c = chain_decompose(h, int(v))
    print(v, "depth", gs.depth[v], "->", c.chain.tolist(), "levels", c.link_levels.tolist())


# ## Dyadic pairs on K2
#
# Vertices of K2 at distance D from the kernel pair up with a vertex 2^i closer,
# where 2^i is the largest power of two dividing D.

# In[4]:

d = dyadic_k2_pairs(gs)
print([len(x) for x in d.pairs], d.within_bound)
