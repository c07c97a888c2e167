# coding: utf-8

# # Free field maxima and cover times
#
# The cover time of the giant is predicted to be about 2 |E| M^2 where M is the
# expected maximum of the Gaussian free field pinned at one vertex. This script
# estimates M, runs the walk from a few starts, and prints the ratios.
# Runs in a couple of minutes at N = 2.5e5.

# In[1]:

import math

import numpy as np

from giantwalk.giant import ModelParams, sample_giant
from giantwalk.gff import estimate_M, expected_max_iid_normals, union_bound_max
from giantwalk.resistance import max_resistance_estimate
from giantwalk.walk import cover_report

p = ModelParams.from_eps(250_000, 0.1)
gs = sample_giant(p, seed=5)
g = gs.graph
print(g.vertex_count, g.edge_count)


# ## M by Monte Carlo
#
# Each replica is one exact draw of the field from the sparse Cholesky-type
# factor of the grounded Laplacian.

# In[2]:

est = estimate_M(g, 0, 2000, 11)
print(f"M = {est.M:.3f} +/- {est.se:.3f}   max variance {est.sigma2:.1f}")
print("union bound:", union_bound_max(math.sqrt(est.sigma2_bound), g.vertex_count))
print("iid normals with the same count:", expected_max_iid_normals(g.vertex_count))


# Field maxima concentrate: the spread of replica maxima is of order sqrt(sigma2).

# In[3]:

print(np.percentile(est.maxima, [5, 50, 95]), math.sqrt(est.sigma2))


# ## Resistances

# In[4]:

mr = max_resistance_estimate(gs, 200, np.random.default_rng(0))
print("max R in K2:", mr.k2_max, " in H:", mr.h_max, " violations:", mr.distance_violations)


# ## Cover time

# In[5]:

rep = cover_report(gs, est.M, mr.h_max, replicas=10, seed=3, random_starts=2)
for s, lab, run in zip(rep.starts, rep.labels, rep.runs):
    print(f"{lab:8s} {s:7d}  {run.mean:.4g} +/- {run.se:.2g}")
print(rep.ratio_table())
print("2|E|M^2 =", 2 * g.edge_count * est.M ** 2)
