import pytest
from hypothesis import given, strategies as st

from relaygame.errors import BranchingTooSmallError, InvalidConfigError
from relaygame.topology import Forest, NetworkConfig, build_forest, full_subtree_size


def test_single_root_forest():
    forest = build_forest(NetworkConfig(t=1, d=3, H=1))
    assert forest.node_count == 1
    assert forest.seeds == (0,)
    assert forest.children[0] == ()
    assert forest.parents[0] == -1


def test_seven_trees_size():
    forest = build_forest(NetworkConfig(t=7, d=3, H=3))
    assert forest.config.tree_size == 13  # (27 - 1) / 2
    assert forest.node_count == 91


@pytest.mark.parametrize("t,d,H", [(2, 1, 3), (0, 3, 2), (1, 3, 0)])
def test_invalid_configs(t, d, H):
    with pytest.raises(InvalidConfigError):
        NetworkConfig(t=t, d=d, H=H)


def test_full_subtree_size_values():
    assert full_subtree_size(3, 0) == 0
    assert full_subtree_size(3, 2) == 4
    assert full_subtree_size(3, 3) == 13
    with pytest.raises(InvalidConfigError):
        full_subtree_size(1, 2)
    with pytest.raises(InvalidConfigError):
        full_subtree_size(3, -1)


@given(st.integers(min_value=2, max_value=16), st.integers(min_value=0, max_value=18))
def test_subtree_size_recurrence(d, y):
    assert full_subtree_size(d, y + 1) == d * full_subtree_size(d, y) + 1


def _recursive_count(forest: Forest, v: int) -> int:
    return 1 + sum(_recursive_count(forest, c) for c in forest.children[v])


@given(
    st.integers(min_value=1, max_value=4),
    st.integers(min_value=2, max_value=4),
    st.integers(min_value=1, max_value=4),
)
def test_node_count_matches_recursive_count(t, d, H):
    config = NetworkConfig(t=t, d=d, H=H)
    forest = build_forest(config)
    assert forest.node_count == config.node_count
    assert sum(_recursive_count(forest, s) for s in forest.seeds) == config.node_count


def test_structure_invariants():
    forest = build_forest(NetworkConfig(t=2, d=3, H=3))
    for v in range(forest.node_count):
        if v in forest.seeds:
            assert forest.parents[v] == -1
            assert forest.depths[v] == 1
        else:
            parent = forest.parents[v]
            assert v in forest.children[parent]
            assert forest.depths[v] == forest.depths[parent] + 1
        if forest.depths[v] < 3:
            assert len(forest.children[v]) == 3
        else:
            assert forest.is_leaf(v)
    # breadth-first numbering per tree, trees in seed order
    assert forest.seeds == (0, 13)
    assert forest.children[0] == (1, 2, 3)
    assert forest.children[1] == (4, 5, 6)


def test_path_and_subtree_helpers():
    forest = build_forest(NetworkConfig(t=1, d=2, H=3))
    leaf = forest.node_count - 1
    path = forest.path_to_seed(leaf)
    assert path[0] == leaf and path[-1] == 0
    assert len(path) == 3
    assert sorted(forest.subtree(0)) == list(range(forest.node_count))
    assert forest.subtree(leaf) == [leaf]


def test_guarantee_branching_rejects_d2():
    config = NetworkConfig(t=1, d=2, H=2)
    with pytest.raises(BranchingTooSmallError):
        config.require_guarantee_branching()
    NetworkConfig(t=1, d=3, H=2).require_guarantee_branching()
