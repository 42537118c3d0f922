"""Convex-regularized Monte-Carlo tree search with exact oracles and a synthetic-tree benchmark."""

from .regularizers import (
    RegularizerContext,
    RegularizerKind,
    conjugate_value,
    entropy_range,
    entropy_value,
    policy,
    regularizer_bounds,
    support_set,
)
from .search import Algorithm, AlgorithmConfig, SearchResult, Trajectory, run_search
from .synthetic import SyntheticTree, env_adapter, generate_tree
from .tree import SearchTree

__version__ = "0.1.0"
