import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regmcts.tree import AlreadyExpandedError, SearchTree, new_tree


def test_new_tree_has_zeroed_root():
    tree = new_tree(2)
    root = tree.nodes[tree.root]
    assert root.visit_counts == [0, 0] and root.q_values == [0.0, 0.0]
    assert root.children == [None, None] and root.prior == [0.5, 0.5]
    assert len(SearchTree(16).nodes[0].q_values) == 16


@pytest.mark.parametrize("n", [0, -1, 1.5])
def test_new_tree_rejects_bad_action_count(n):
    with pytest.raises(ValueError):
        SearchTree(n)


def test_expand_links_fresh_child():
    tree = SearchTree(2)
    child = tree.expand(0, 0)
    assert tree.nodes[0].children[0] == child and tree.node(child).depth == 1
    grandchild = tree.expand(child, 1)
    assert tree.node(grandchild).depth == 2
    node = tree.node(grandchild)
    assert node.q_values == [0.0, 0.0] and node.visit_counts == [0, 0] and node.total_visits == 0


def test_expand_errors():
    tree = SearchTree(2)
    tree.expand(0, 0)
    with pytest.raises(AlreadyExpandedError):
        tree.expand(0, 0)
    with pytest.raises(ValueError):
        tree.expand(7, 0)
    with pytest.raises(ValueError):
        tree.expand(0, 2)


def test_record_visit_overwrites():
    tree = SearchTree(2)
    tree.record_visit(0, 0, 0.7)
    assert tree.nodes[0].visit_counts == [1, 0] and tree.nodes[0].q_values == [0.7, 0.0]
    tree.record_visit(0, 0, 0.4)
    assert tree.nodes[0].visit_counts == [2, 0] and tree.nodes[0].q_values[0] == 0.4
    with pytest.raises(ValueError):
        tree.record_visit(0, 2, 0.1)
    with pytest.raises(ValueError):
        tree.record_visit(3, 0, 0.1)


@settings(max_examples=100, deadline=None)
@given(ops=st.lists(st.tuples(st.booleans(), st.integers(0, 50), st.integers(0, 3), st.floats(-1, 1)), max_size=60))
def test_counts_and_acyclicity_under_random_operations(ops):
    tree = SearchTree(4)
    for is_expand, node, action, q in ops:
        node %= len(tree)
        if is_expand:
            if tree.nodes[node].children[action] is None:
                tree.expand(node, action)
        else:
            tree.record_visit(node, action, q)
    for node in tree.nodes:
        assert node.total_visits == sum(node.visit_counts)
    order = list(tree.walk())
    assert sorted(order) == list(range(len(tree)))
    parents = [c for n in tree.nodes for c in n.children if c is not None]
    assert len(parents) == len(set(parents)) == len(tree) - 1 and 0 not in parents


def test_debug_dump_is_structured():
    tree = SearchTree(2)
    child = tree.expand(0, 1)
    tree.record_visit(0, 1, 0.25)
    buf = io.StringIO()
    tree.dump(buf)
    doc = json.loads(buf.getvalue())
    assert doc == {
        "action_count": 2,
        "nodes": [
            {"id": 0, "depth": 0, "N": [0, 1], "Q": [0.0, 0.25], "children": [None, child]},
            {"id": 1, "depth": 1, "N": [0, 0], "Q": [0.0, 0.0], "children": [None, None]},
        ],
    }
