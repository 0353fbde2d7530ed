"""Forests of complete d-ary trees and subtree size arithmetic.

A network is t complete d-ary trees of height H, all edges directed from
the roots ("seeds") toward the leaves. Nodes are numbered densely:
tree s occupies the index block [s*m, (s+1)*m) where m is the per-tree
size, breadth-first within the tree. The numbering is deterministic so
profiles can be stored in flat arrays and test output is reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import BranchingTooSmallError, InvalidConfigError

__all__ = ["NetworkConfig", "Forest", "build_forest", "full_subtree_size"]


def full_subtree_size(d: int, y: int) -> int:
    """Number of nodes in a complete d-ary tree of height y: (d^y - 1)/(d - 1).

    Exact integer arithmetic; y = 0 is the empty tree.
    """
    if d < 2:
        raise InvalidConfigError(f"branching factor d={d} must be >= 2")
    if y < 0:
        raise InvalidConfigError(f"height y={y} must be >= 0")
    return (d**y - 1) // (d - 1)


@dataclass(frozen=True)
class NetworkConfig:
    """Shape of the network: t seeds, branching d, tree height H."""

    t: int
    d: int
    H: int

    def __post_init__(self) -> None:
        if self.t < 1:
            raise InvalidConfigError(f"seed count t={self.t} must be >= 1")
        if self.d < 2:
            raise InvalidConfigError(f"branching factor d={self.d} must be >= 2")
        if self.H < 1:
            raise InvalidConfigError(f"tree height H={self.H} must be >= 1")

    @property
    def tree_size(self) -> int:
        return full_subtree_size(self.d, self.H)

    @property
    def node_count(self) -> int:
        return self.t * self.tree_size

    def require_guarantee_branching(self) -> None:
        """Convergence guarantees need d >= 3; d = 2 is rejected distinctly."""
        if self.d < 3:
            raise BranchingTooSmallError(
                f"branching factor d={self.d}: elimination guarantees require d >= 3"
            )


@dataclass(frozen=True)
class Forest:
    """Immutable forest with parent/children links.

    parents[v] is -1 for seeds. depths are 1-based (a seed has depth 1,
    leaves have depth H). tree_index[v] names the seed block v belongs to.
    """

    config: NetworkConfig
    parents: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    depths: tuple[int, ...]
    tree_index: tuple[int, ...]
    seeds: tuple[int, ...]

    @property
    def node_count(self) -> int:
        return len(self.parents)

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    def child_position(self, parent: int, child: int) -> int:
        """0-based index of child among parent's children."""
        return self.children[parent].index(child)

    def path_to_seed(self, v: int) -> list[int]:
        """Nodes from v up to (and including) its seed."""
        path = [v]
        while self.parents[path[-1]] >= 0:
            path.append(self.parents[path[-1]])
        return path

    def subtree(self, v: int) -> list[int]:
        """All nodes of the subtree rooted at v (v first, breadth-first)."""
        out = [v]
        i = 0
        while i < len(out):
            out.extend(self.children[out[i]])
            i += 1
        return out


def build_forest(config: NetworkConfig) -> Forest:
    """Build t complete d-ary trees of height H with BFS numbering per tree."""
    t, d, H = config.t, config.d, config.H
    m = config.tree_size
    n = config.node_count
    parents = [-1] * n
    children: list[tuple[int, ...]] = [()] * n
    depths = [0] * n
    tree_index = [0] * n
    seeds = []
    internal = full_subtree_size(d, H - 1)  # locals below this index have children
    for s in range(t):
        base = s * m
        seeds.append(base)
        for local in range(m):
            v = base + local
            tree_index[v] = s
            if local == 0:
                depths[v] = 1
            else:
                parent = base + (local - 1) // d
                parents[v] = parent
                depths[v] = depths[parent] + 1
            if local < internal:
                first = base + local * d + 1
                children[v] = tuple(range(first, first + d))
    return Forest(
        config=config,
        parents=tuple(parents),
        children=tuple(children),
        depths=tuple(depths),
        tree_index=tuple(tree_index),
        seeds=tuple(seeds),
    )
