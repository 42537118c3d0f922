"""
Synthetic k-ary tree benchmark.

Every edge of a depth-``d`` tree with branching factor ``k`` carries a value
drawn uniformly from [0, 1]. A leaf's mean is the sum of edge values along
its root path, min-max normalized over all leaves, and evaluating a leaf
returns a Gaussian draw around that mean.

Edge values are drawn breadth-first, and within a level node by node with
actions in ascending order. The node at depth ``t`` with index ``i`` reaches
child ``i * k + a`` through action ``a``, so leaves are numbered left to right
and ``edge_values`` is laid out level after level with ``k ** (t + 1)``
entries for level ``t``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

DEFAULT_SIGMA = 0.05


@dataclass(frozen=True, eq=False)
class SyntheticTree:
    k: int
    d: int
    edge_values: np.ndarray
    leaf_means: np.ndarray
    sigma: float = DEFAULT_SIGMA
    seed: int | None = None

    @property
    def num_leaves(self) -> int:
        return self.k ** self.d

    def level_edges(self, depth: int) -> np.ndarray:
        """Edge values leaving depth ``depth``, shaped (k**depth, k)."""
        start = sum(self.k ** (t + 1) for t in range(depth))
        return self.edge_values[start : start + self.k ** (depth + 1)].reshape(-1, self.k)


def _check_shape(k: int, d: int):
    if int(k) != k or k < 2:
        raise ValueError(f"branching factor k must be an integer >= 2, got {k!r}")
    if int(d) != d or d < 1:
        raise ValueError(f"depth d must be an integer >= 1, got {d!r}")


def num_edges(k: int, d: int) -> int:
    return sum(k ** (t + 1) for t in range(d))


def normalize_means(raw: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; all-equal input maps to 0.5."""
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.full_like(raw, 0.5)
    return (raw - lo) / (hi - lo)


def from_edges(k: int, d: int, edge_values, sigma: float = DEFAULT_SIGMA, seed=None) -> SyntheticTree:
    """Build a tree from explicit breadth-first edge values."""
    _check_shape(k, d)
    if not sigma >= 0:
        raise ValueError(f"sigma must be non-negative, got {sigma!r}")
    edges = np.array(edge_values, dtype=float)
    if edges.shape != (num_edges(k, d),):
        raise ValueError(f"expected {num_edges(k, d)} edge values, got shape {edges.shape}")
    sums = np.zeros(1)
    start = 0
    for t in range(d):
        n = k ** (t + 1)
        sums = np.repeat(sums, k) + edges[start : start + n]
        start += n
    means = normalize_means(sums)
    edges.setflags(write=False)
    means.setflags(write=False)
    return SyntheticTree(k=int(k), d=int(d), edge_values=edges, leaf_means=means, sigma=float(sigma), seed=seed)


def generate_tree(k: int, d: int, seed: int, sigma: float = DEFAULT_SIGMA) -> SyntheticTree:
    _check_shape(k, d)
    rng = np.random.default_rng(seed)
    return from_edges(k, d, rng.random(num_edges(k, d)), sigma=sigma, seed=int(seed))


def sample_leaf(tree: SyntheticTree, leaf: int, rng: np.random.Generator) -> float:
    """One Gaussian evaluation of ``leaf`` (not truncated)."""
    if not 0 <= leaf < tree.num_leaves:
        raise ValueError(f"leaf {leaf} out of range for {tree.num_leaves} leaves")
    # sigma * z rather than rng.normal(mean, sigma): same draw consumed whatever sigma is
    return float(tree.leaf_means[leaf]) + tree.sigma * rng.standard_normal()


class SyntheticEnv:
    """Search environment over a :class:`SyntheticTree`.

    States are ``(depth, index)`` pairs. Transitions are deterministic, all
    rewards are zero, and the only signal comes from evaluating a leaf.
    """

    def __init__(self, tree: SyntheticTree):
        self.tree = tree
        self.num_actions = tree.k
        self._k = tree.k
        self._d = tree.d
        self._means = tree.leaf_means.tolist()
        self._sigma = tree.sigma

    def root(self):
        return (0, 0)

    def step(self, state, action):
        return (state[0] + 1, state[1] * self._k + action)

    def reward(self, state, action) -> float:
        return 0.0

    def is_terminal(self, state) -> bool:
        return state[0] >= self._d

    def evaluate(self, state, rng) -> float:
        depth, index = state
        if depth != self._d:
            raise ValueError(f"state {state} is not a leaf")
        return self._means[index] + self._sigma * rng.standard_normal()


def env_adapter(tree: SyntheticTree) -> SyntheticEnv:
    return SyntheticEnv(tree)


def tree_to_dict(tree: SyntheticTree) -> dict:
    return {
        "format": "synthetic-tree/1",
        "k": tree.k,
        "d": tree.d,
        "seed": tree.seed,
        "sigma": tree.sigma,
        "edge_values": tree.edge_values.tolist(),
        "leaf_means": tree.leaf_means.tolist(),
    }


def save_tree(tree: SyntheticTree, path) -> None:
    """Write the tree as JSON.

    Fields: ``format`` (always ``synthetic-tree/1``), ``k``, ``d``, ``seed``
    (null for hand-built trees), ``sigma``, ``edge_values`` (breadth-first,
    ``sum_t k**(t+1)`` floats) and ``leaf_means`` (``k**d`` floats, left to
    right). Floats are written in shortest round-trip form.
    """
    with open(path, "w") as fp:
        json.dump(tree_to_dict(tree), fp)
        fp.write("\n")


def load_tree(path) -> SyntheticTree:
    with open(path) as fp:
        doc = json.load(fp)
    if doc.get("format") != "synthetic-tree/1":
        raise ValueError(f"{path}: not a synthetic tree document")
    tree = from_edges(doc["k"], doc["d"], doc["edge_values"], sigma=doc["sigma"], seed=doc["seed"])
    stored = np.array(doc["leaf_means"], dtype=float)
    if not np.array_equal(stored, tree.leaf_means):
        raise ValueError(f"{path}: leaf means do not match the edge values")
    return tree
