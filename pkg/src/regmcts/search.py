"""
Regularized Monte-Carlo tree search (MENTS, RENTS, TENTS) and a UCT baseline.

Each simulation selects actions down the tree, expands one new node (or stops
at a terminal state), obtains a leaf estimate and backs it up. Regularized
algorithms select with E3W, a mixture of the regularizer's maximizing policy
and a uniform distribution whose weight decays with the visit count, and
back up ``r + gamma * Omega*_tau(Q(child))``. UCT selects by upper confidence
score and backs up Monte-Carlo averages.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Protocol, Sequence

import numpy as np

from ._kernels import KERNELS
from .regularizers import RegularizerContext, RegularizerKind
from .tree import SearchTree, TreeNode


class Algorithm(str, enum.Enum):
    UCT = "UCT"
    MENTS = "MENTS"
    RENTS = "RENTS"
    TENTS = "TENTS"

    @property
    def regularizer(self) -> Optional[RegularizerKind]:
        return _REGULARIZER[self]


_REGULARIZER = {
    Algorithm.UCT: None,
    Algorithm.MENTS: RegularizerKind.MAXIMUM_ENTROPY,
    Algorithm.RENTS: RegularizerKind.RELATIVE_ENTROPY,
    Algorithm.TENTS: RegularizerKind.TSALLIS_ENTROPY,
}


@dataclass(frozen=True)
class AlgorithmConfig:
    """Search settings. For UCT ``epsilon`` is the exploration constant."""

    algorithm: Algorithm
    tau: float = 0.1
    epsilon: float = 0.1
    gamma: float = 1.0
    simulation_budget: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma!r}")
        if int(self.simulation_budget) != self.simulation_budget or self.simulation_budget < 1:
            raise ValueError(f"simulation_budget must be a positive integer, got {self.simulation_budget!r}")

    def context(self, num_actions: int) -> Optional[RegularizerContext]:
        """Regularizer context for this algorithm (uniform prior for RENTS, None for UCT)."""
        kind = self.algorithm.regularizer
        if kind is None:
            return None
        return RegularizerContext.uniform(kind, self.tau, num_actions)


class Environment(Protocol):
    num_actions: int

    def root(self) -> Any: ...

    def step(self, state: Any, action: int) -> Any: ...

    def reward(self, state: Any, action: int) -> float: ...

    def is_terminal(self, state: Any) -> bool: ...

    def evaluate(self, state: Any, rng: np.random.Generator) -> float: ...


@dataclass
class Trajectory:
    """(node, action) pairs from the root down, and the estimate for the deepest pair.

    ``terminal`` marks that the deepest action led into a terminal state, in
    which case ``leaf_value`` is one noisy evaluation of that state.
    """

    steps: list[tuple[int, int]]
    leaf_value: float
    terminal: bool = False


@dataclass
class SearchResult:
    recommended_action: int
    root_value_trace: np.ndarray
    root_choice_trace: np.ndarray
    final_tree: SearchTree = field(repr=False)


def e3w_lambda(total_visits: int, num_actions: int, epsilon: float) -> float:
    """Uniform-exploration weight ``min(1, eps * |A| / log(N + 1))``; 1 when unvisited."""
    denom = math.log(total_visits + 1)
    if denom <= 0.0:
        return 1.0
    return min(1.0, epsilon * num_actions / denom)


def _kernels(ctx: RegularizerContext):
    return KERNELS[ctx.kind]


def e3w_distribution(node: TreeNode, ctx: RegularizerContext, epsilon: float) -> list[float]:
    """E3W mixture at ``node``. Relative entropy is measured against the node's stored prior."""
    n = len(node.q_values)
    lam = e3w_lambda(node.total_visits, n, epsilon)
    if lam >= 1.0:
        return [1.0 / n] * n
    pol = _kernels(ctx)[1](node.q_values, ctx.tau, node.prior)
    u = lam / n
    keep = 1.0 - lam
    return [keep * p + u for p in pol]


def _inverse_cdf(probs: Sequence[float], u: float) -> int:
    cumulative = 0.0
    last = 0
    for a, p in enumerate(probs):
        if p > 0.0:
            cumulative += p
            last = a
            if u < cumulative:
                return a
    return last


def e3w_sample(node: TreeNode, ctx: RegularizerContext, epsilon: float, rng: np.random.Generator) -> int:
    """Draw an action from the E3W mixture using a single uniform variate."""
    return _inverse_cdf(e3w_distribution(node, ctx, epsilon), rng.random())


def uct_score(q: float, n_s: int, n_sa: int, c: float) -> float:
    if n_sa == 0:
        return math.inf
    return q + c * math.sqrt(math.log(n_s) / n_sa)


def uct_select(node: TreeNode, c: float) -> int:
    """Highest UCT score, lowest index on ties; untried actions come first."""
    counts = node.visit_counts
    for a, n in enumerate(counts):
        if n == 0:
            return a
    log_n = math.log(node.total_visits)
    best, best_score = 0, -math.inf
    for a, (q, n) in enumerate(zip(node.q_values, counts)):
        score = q + c * math.sqrt(log_n / n)
        if score > best_score:
            best, best_score = a, score
    return best


def backup_trajectory(
    tree: SearchTree,
    traj: Trajectory,
    ctx: Optional[RegularizerContext],
    gamma: float,
    rewards: Sequence[float],
) -> None:
    """Propagate a simulation's result from the deepest pair to the root.

    With a regularizer, the deepest pair receives ``r + gamma * leaf_value``
    and every shallower pair ``r + gamma * Omega*_tau(Q(child))``. Terminal
    evaluations are noisy, so when the deepest pair ends in a terminal state
    its value is the running mean of the evaluations seen so far. For relative
    entropy each node's prior is replaced by its current policy right after
    the node's value changes.

    With ``ctx=None`` (UCT) every pair keeps the running mean of the
    discounted return observed below it.
    """
    steps = traj.steps
    if not steps:
        raise ValueError("trajectory is empty")
    if len(rewards) != len(steps):
        raise ValueError(f"{len(rewards)} rewards for {len(steps)} trajectory steps")
    nodes = tree.nodes
    for (parent, action), (child, _) in zip(steps, steps[1:]):
        if tree.node(parent).children[action] != child:
            raise ValueError("trajectory steps are not parent/child linked")

    if ctx is None:
        ret = traj.leaf_value
        for (node_id, action), r in zip(reversed(steps), reversed(rewards)):
            ret = r + gamma * ret
            node = tree.node(node_id)
            n = node.visit_counts[action] + 1
            q = node.q_values[action]
            tree.record_visit(node_id, action, q + (ret - q) / n)
        return

    value_fn, policy_fn = _kernels(ctx)
    tau = ctx.tau
    relative = ctx.kind is RegularizerKind.RELATIVE_ENTROPY
    node_id, action = steps[-1]
    node = tree.node(node_id)
    target = rewards[-1] + gamma * traj.leaf_value
    if traj.terminal:
        q = node.q_values[action]
        target = q + (target - q) / (node.visit_counts[action] + 1)
    tree.record_visit(node_id, action, target)
    if relative:
        node.prior = policy_fn(node.q_values, tau, node.prior)
    for i in range(len(steps) - 2, -1, -1):
        node_id, action = steps[i]
        node = tree.node(node_id)
        child = nodes[steps[i + 1][0]]
        tree.record_visit(node_id, action, rewards[i] + gamma * value_fn(child.q_values, tau, child.prior))
        if relative:
            node.prior = policy_fn(node.q_values, tau, node.prior)


def rollout(env: Environment, state, gamma: float, rng: np.random.Generator) -> float:
    """Uniformly random actions from ``state`` to a terminal state; discounted return."""
    k = env.num_actions
    ret = 0.0
    discount = 1.0
    while not env.is_terminal(state):
        a = int(rng.random() * k)
        ret += discount * env.reward(state, a)
        discount *= gamma
        state = env.step(state, a)
    return ret + discount * env.evaluate(state, rng)


def root_value(tree: SearchTree, ctx: Optional[RegularizerContext]) -> float:
    """Root estimate: ``Omega*_tau(Q(root))``, or ``max_a Q(root, a)`` for UCT."""
    root = tree.nodes[tree.root]
    if ctx is None:
        return max(root.q_values)
    return _kernels(ctx)[0](root.q_values, ctx.tau, root.prior)


def recommend(tree: SearchTree, ctx: Optional[RegularizerContext]) -> int:
    root = tree.nodes[tree.root]
    if ctx is None:
        return int(np.argmax(root.visit_counts))
    return int(np.argmax(_kernels(ctx)[1](root.q_values, ctx.tau, root.prior)))


def run_search(
    env: Environment,
    cfg: AlgorithmConfig,
    ctx: Optional[RegularizerContext],
    rng: np.random.Generator,
    debug: bool = False,
) -> SearchResult:
    """Run ``cfg.simulation_budget`` simulations from ``env.root()``.

    ``ctx`` must match the algorithm (None for UCT); pass ``cfg.context(k)``
    for the defaults. For RENTS the root starts from ``ctx.prior`` and every
    other node from a uniform prior. With ``debug`` each E3W mixture is
    checked to sum to one.
    """
    kind = cfg.algorithm.regularizer
    if (ctx is None) != (kind is None) or (ctx is not None and ctx.kind is not kind):
        raise ValueError(f"context {ctx!r} does not match algorithm {cfg.algorithm.value}")
    k = env.num_actions
    budget = cfg.simulation_budget
    gamma = cfg.gamma
    eps = cfg.epsilon
    tree = SearchTree(k)
    nodes = tree.nodes
    if ctx is not None:
        if ctx.kind is RegularizerKind.RELATIVE_ENTROPY:
            if ctx.prior.shape[0] != k:
                raise ValueError(f"prior has {ctx.prior.shape[0]} entries for {k} actions")
            nodes[0].prior = ctx.prior.tolist()
        value_fn, policy_fn = _kernels(ctx)
        tau = ctx.tau
    start = env.root()
    if env.is_terminal(start):
        raise ValueError("root state is terminal")

    values = np.empty(budget)
    choices = np.empty(budget, dtype=np.int64)
    random = rng.random
    log = math.log
    for sim in range(budget):
        node_id = 0
        state = start
        steps = []
        rewards = []
        while True:
            node = nodes[node_id]
            if ctx is None:
                a = uct_select(node, eps)
            else:
                n_total = node.total_visits
                lam = 1.0 if n_total == 0 else min(1.0, eps * k / log(n_total + 1))
                if lam >= 1.0:
                    a = int(random() * k)
                    if debug:
                        assert a < k
                else:
                    pol = policy_fn(node.q_values, tau, node.prior)
                    u = lam / k
                    keep = 1.0 - lam
                    mix = [keep * p + u for p in pol]
                    if debug:
                        assert abs(sum(mix) - 1.0) <= 1e-9, mix
                    a = _inverse_cdf(mix, random())
            steps.append((node_id, a))
            rewards.append(env.reward(state, a))
            nxt = env.step(state, a)
            if env.is_terminal(nxt):
                traj = Trajectory(steps, env.evaluate(nxt, rng), terminal=True)
                break
            child = node.children[a]
            if child is None:
                tree.expand(node_id, a)
                traj = Trajectory(steps, rollout(env, nxt, gamma, rng))
                break
            node_id = child
            state = nxt
        backup_trajectory(tree, traj, ctx, gamma, rewards)
        choices[sim] = steps[0][1]
        root = nodes[0]
        values[sim] = max(root.q_values) if ctx is None else value_fn(root.q_values, tau, root.prior)

    return SearchResult(
        recommended_action=recommend(tree, ctx),
        root_value_trace=values,
        root_choice_trace=choices,
        final_tree=tree,
    )
