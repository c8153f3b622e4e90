"""Benchmark generators and loaders."""
from .ad_alloc import AdAllocConfig, exposure_constraints, gen_ad_alloc
from .bipartite import BipartiteConfig, gen_bipartite, perturb_labels
from .cora import load_cora
from .quadratic import QuadraticExample, grid_membership, overlap_ratio, quadratic_pareto_set

__all__ = [
    "AdAllocConfig",
    "BipartiteConfig",
    "QuadraticExample",
    "exposure_constraints",
    "gen_ad_alloc",
    "gen_bipartite",
    "grid_membership",
    "load_cora",
    "overlap_ratio",
    "perturb_labels",
    "quadratic_pareto_set",
]
