"""Random-walk cover times, effective resistance and Gaussian free fields
on the emerging giant component of a sparse random graph."""

from .errors import GiantWalkError
from .gff import estimate_M, expected_max_iid_normals, sample_gff, slepian_check, union_bound_max
from .giant import ModelParams, apoh_report, sample_giant, solve_mu
from .graph import Graph, bfs_distances, build_graph, diameter_exact, read_graph, write_graph
from .gw import depth_census, sample_pgw_tree, survival_prob_exact
from .resistance import LaplacianFactor, commute_identity_check, effective_resistance
from .skeleton import build_hierarchy, chain_decompose, dyadic_k2_pairs, verify_budgets
from .walk import exact_cover_small, predict_cover, simulate_cover

__version__ = "0.1.0"

__all__ = [
    "GiantWalkError", "Graph", "LaplacianFactor", "ModelParams",
    "apoh_report", "bfs_distances", "build_graph", "build_hierarchy", "chain_decompose",
    "commute_identity_check", "depth_census", "diameter_exact", "dyadic_k2_pairs",
    "effective_resistance", "estimate_M", "exact_cover_small", "expected_max_iid_normals",
    "predict_cover", "read_graph", "sample_gff", "sample_giant", "sample_pgw_tree",
    "simulate_cover", "slepian_check", "solve_mu", "survival_prob_exact",
    "union_bound_max", "verify_budgets", "write_graph",
]
