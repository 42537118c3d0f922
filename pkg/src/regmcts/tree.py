"""Arena-backed search tree holding per-action visit counts and values."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional


class AlreadyExpandedError(RuntimeError):
    """Raised when expanding an action slot that already has a child."""


@dataclass(slots=True)
class TreeNode:
    visit_counts: list[int]
    q_values: list[float]
    children: list[Optional[int]]
    prior: list[float]
    depth: int = 0
    total_visits: int = 0

    @classmethod
    def fresh(cls, action_count: int, depth: int) -> "TreeNode":
        return cls(
            visit_counts=[0] * action_count,
            q_values=[0.0] * action_count,
            children=[None] * action_count,
            prior=[1.0 / action_count] * action_count,
            depth=depth,
        )


@dataclass
class SearchTree:
    """Nodes live in ``nodes`` and refer to each other by index; the root is node 0.

    New nodes start with all values and counts at zero and a uniform prior.
    """

    action_count: int
    nodes: list[TreeNode] = field(default_factory=list)
    root: int = 0

    def __post_init__(self):
        if int(self.action_count) != self.action_count or self.action_count < 1:
            raise ValueError(f"action_count must be a positive integer, got {self.action_count!r}")
        if not self.nodes:
            self.nodes.append(TreeNode.fresh(self.action_count, 0))

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: int) -> TreeNode:
        if not 0 <= node_id < len(self.nodes):
            raise ValueError(f"invalid node id {node_id}")
        return self.nodes[node_id]

    def _check_action(self, action: int):
        if not 0 <= action < self.action_count:
            raise ValueError(f"action {action} out of range for {self.action_count} actions")

    def expand(self, node_id: int, action: int) -> int:
        """Attach a fresh child under ``(node_id, action)`` and return its id."""
        parent = self.node(node_id)
        self._check_action(action)
        if parent.children[action] is not None:
            raise AlreadyExpandedError(f"node {node_id} already has a child for action {action}")
        child_id = len(self.nodes)
        self.nodes.append(TreeNode.fresh(self.action_count, parent.depth + 1))
        parent.children[action] = child_id
        return child_id

    def record_visit(self, node_id: int, action: int, new_q: float) -> None:
        """Count one visit of ``(node_id, action)`` and overwrite its value with ``new_q``."""
        node = self.node(node_id)
        self._check_action(action)
        node.visit_counts[action] += 1
        node.total_visits += 1
        node.q_values[action] = new_q

    def walk(self):
        """Yield node ids depth-first from the root, children in action order."""
        stack = [self.root]
        while stack:
            node_id = stack.pop()
            yield node_id
            stack.extend(c for c in reversed(self.nodes[node_id].children) if c is not None)

    def to_dict(self) -> dict:
        return {
            "action_count": self.action_count,
            "nodes": [
                {
                    "id": i,
                    "depth": n.depth,
                    "N": list(n.visit_counts),
                    "Q": list(n.q_values),
                    "children": list(n.children),
                }
                for i, n in enumerate(self.nodes)
            ],
        }

    def dump(self, fp) -> None:
        """Write the debug document (one entry per node: id, depth, N, Q, children)."""
        json.dump(self.to_dict(), fp, indent=1)
        fp.write("\n")


def new_tree(action_count: int) -> SearchTree:
    return SearchTree(action_count)
