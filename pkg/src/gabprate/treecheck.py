"""Unwrapped (computation) trees and the checks that tie them to loopy runs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dominance import Classification, DominanceReport, classify
from .errors import NotWeaklyDominant, TreeTooLarge
from .solver import iterate_states
from .system import InducedGraph, SparseSystem, as_scaling, build_induced_graph

MAX_TREE_NODES = 10**6


@dataclass(frozen=True)
class TreeNode:
    tree_id: int
    sigma: int
    parent: Optional[int]
    depth: int


@dataclass(frozen=True, eq=False)
class UnwrappedTree:
    nodes: tuple
    tree_system: SparseSystem
    root: int = 0

    @property
    def sigma(self) -> np.ndarray:
        return np.array([t.sigma for t in self.nodes], dtype=np.int64)

    def layer_sizes(self) -> list:
        return np.bincount([t.depth for t in self.nodes]).tolist()


def build_unwrapped_tree(sys: SparseSystem, g: Optional[InducedGraph], root: int, depth: int) -> UnwrappedTree:
    """Grow the depth-``depth`` computation tree of ``g`` rooted at ``root``.

    Each round attaches to every current leaf all graph neighbours of its
    original node except the original node of its parent, in ascending order.
    """
    g = build_induced_graph(sys) if g is None else g
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if not 0 <= root < sys.n:
        raise ValueError(f"root {root} outside 0..{sys.n - 1}")
    nodes = [TreeNode(0, root, None, 0)]
    leaves = [0]
    for level in range(1, depth + 1):
        new_leaves = []
        for t in leaves:
            node = nodes[t]
            parent_sigma = None if node.parent is None else nodes[node.parent].sigma
            for v in g.neighbors[node.sigma]:
                if v == parent_sigma:
                    continue
                if len(nodes) >= MAX_TREE_NODES:
                    raise TreeTooLarge(f"unwrapped tree exceeds {MAX_TREE_NODES} nodes at depth {level}")
                nodes.append(TreeNode(len(nodes), v, t, level))
                new_leaves.append(len(nodes) - 1)
        leaves = new_leaves

    weights = sys.entries()
    diag = np.asarray(sys.diag)
    entries = {(t.tree_id, t.tree_id): diag[t.sigma] for t in nodes}
    for t in nodes[1:]:
        p = nodes[t.parent]
        up = weights.get((t.sigma, p.sigma), 0.0)
        down = weights.get((p.sigma, t.sigma), 0.0)
        if up != 0:
            entries[(t.tree_id, p.tree_id)] = up
        if down != 0:
            entries[(p.tree_id, t.tree_id)] = down
    b = np.asarray(sys.b)[[t.sigma for t in nodes]]
    return UnwrappedTree(tuple(nodes), SparseSystem.from_entries(len(nodes), entries, b), 0)


@dataclass(frozen=True)
class RootEquivalenceReport:
    root: int
    rounds: int
    x_graph: float
    x_tree: float
    abs_diff: float
    ok: bool


def verify_root_equivalence(sys: SparseSystem, g: Optional[InducedGraph], root: int, k: int) -> RootEquivalenceReport:
    """Compare the root estimate after ``k`` rounds on the graph and on its depth-``k`` tree."""
    g = build_induced_graph(sys) if g is None else g
    x_graph = _estimate_after(sys, g, k)[root]
    tree = build_unwrapped_tree(sys, g, root, k)
    x_tree = _estimate_after(tree.tree_system, None, k)[tree.root]
    diff = abs(x_graph - x_tree)
    return RootEquivalenceReport(root, k, float(x_graph), float(x_tree), float(diff), bool(diff <= 1e-10 * (1 + abs(x_graph))))


def _estimate_after(sys, g, k):
    g = build_induced_graph(sys) if g is None else g
    state = None
    for state in iterate_states(sys, g, k):
        pass
    return state.x_est


@dataclass(frozen=True, eq=False)
class TreeDominanceReport:
    original: DominanceReport
    tree: DominanceReport
    tree_size: int
    ok: bool


def verify_tree_dominance(sys: SparseSystem, g: Optional[InducedGraph], d, root: int, k: int) -> TreeDominanceReport:
    """Classify the depth-``k`` tree with the inherited scaling ``d_tree[t] = d[sigma(t)]``."""
    dv = as_scaling(d, sys.n).d
    original = classify(sys, dv, spectral=False)
    if not original.satisfies(Classification.WeaklyDScaledDD):
        raise NotWeaklyDominant(original.diagnostic or "matrix is not weakly D-scaled dominant")
    tree = build_unwrapped_tree(sys, g, root, k)
    tree_report = classify(tree.tree_system, dv[tree.sigma], spectral=False)
    return TreeDominanceReport(
        original,
        tree_report,
        len(tree.nodes),
        tree_report.satisfies(Classification.WeaklyDScaledDD),
    )
