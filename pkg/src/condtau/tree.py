"""Recursive search for conditioning boxes with contrasting Kendall's taus.

Each node looks, over every conditioned pair ``(i, j)``, every conditioning
coordinate ``k`` and every achievable threshold ``t``, for the split
``x_k <= t`` / ``x_k > t`` that maximises the absolute tau difference of the
two halves (plus an optional size reward ``alpha * min(side share)``).
Recursion stops when no split keeps both sides above the minimum size, when
the best difference falls below ``min_cut``, or at ``max_depth``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import Box, BoxFamily, Interval, Sample, pair_list
from .errors import ValidationError
from .estimators import count_pairs, tau_from_counts


@dataclass(frozen=True)
class TreeConfig:
    min_cut: float = 0.2
    min_size: float = 0.1
    alpha: float = 0.0
    max_depth: int = 6
    gamma: float = 1.0  # exponent of the tau difference; only 1 is supported

    def __post_init__(self):
        if self.min_cut < 0:
            raise ValidationError("min_cut must be >= 0")
        if not 0 <= self.min_size <= 1:
            raise ValidationError("min_size must lie in [0, 1]")
        if self.alpha < 0:
            raise ValidationError("alpha must be >= 0")
        if self.max_depth < 0:
            raise ValidationError("max_depth must be >= 0")
        if self.gamma != 1.0:
            raise ValidationError("only gamma = 1 is supported")

    def min_count(self, n: int) -> int:
        """Smallest admissible number of members on either side of a split."""
        return max(2, math.ceil(self.min_size * n - 1e-9))


@dataclass(frozen=True)
class Split:
    pair: tuple  # 0-based positions in the conditioned block
    coord: int  # 0-based position in the conditioning block
    threshold: float
    diff: float  # unpenalised absolute tau difference
    criterion: float
    left_count: int
    right_count: int


@dataclass
class Node:
    box: Box
    tau: np.ndarray  # one value per pair
    count: int
    depth: int
    split: Split | None = None
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    def iter_nodes(self):
        yield self
        if not self.is_leaf:
            yield from self.left.iter_nodes()
            yield from self.right.iter_nodes()


@dataclass
class DependenceTree:
    root: Node
    pairs: list
    config: TreeConfig
    n: int
    conditioned_names: list = field(default_factory=list)
    conditioning_names: list = field(default_factory=list)

    def leaves(self) -> list[Node]:
        return [node for node in self.root.iter_nodes() if node.is_leaf]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    @property
    def depth(self) -> int:
        return max(node.depth for node in self.root.iter_nodes())

    def _node_dict(self, node: Node) -> dict:
        out = {
            "box": node.box.describe(self.conditioning_names),
            "count": node.count,
            "depth": node.depth,
            "tau": [float(t) for t in node.tau],
        }
        if not node.is_leaf:
            s = node.split
            out["split"] = {
                "pair": [self.conditioned_names[s.pair[0]], self.conditioned_names[s.pair[1]]],
                "variable": self.conditioning_names[s.coord],
                "threshold": s.threshold,
                "diff": s.diff,
                "criterion": s.criterion,
            }
            out["left"] = self._node_dict(node.left)
            out["right"] = self._node_dict(node.right)
        return out

    def to_dict(self) -> dict:
        return {
            "pairs": [[self.conditioned_names[a], self.conditioned_names[b]] for a, b in self.pairs],
            "n": self.n,
            "config": {
                "min_cut": self.config.min_cut,
                "min_size": self.config.min_size,
                "alpha": self.config.alpha,
                "max_depth": self.config.max_depth,
                "gamma": self.config.gamma,
            },
            "n_leaves": self.n_leaves,
            "root": self._node_dict(self.root),
        }

    def to_dot(self) -> str:
        """Graphviz rendering: one node per box, edges labelled by the split condition."""
        lines = ["digraph dependence_tree {", '  node [shape=box, fontname="Helvetica"];']
        ids = {}
        for i, node in enumerate(self.root.iter_nodes()):
            ids[id(node)] = f"n{i}"
            taus = "\\n".join(
                f"tau({self.conditioned_names[a]},{self.conditioned_names[b]}) = {t:.4f}"
                for (a, b), t in zip(self.pairs, node.tau))
            style = "" if node.is_leaf else ", style=rounded"
            lines.append(f'  n{i} [label="{taus}\\nN = {node.count}"{style}];')
        for node in self.root.iter_nodes():
            if node.is_leaf:
                continue
            s = node.split
            var = self.conditioning_names[s.coord]
            lines.append(f'  {ids[id(node)]} -> {ids[id(node.left)]} [label="{var} <= {s.threshold:.6g}"];')
            lines.append(f'  {ids[id(node)]} -> {ids[id(node.right)]} [label="{var} > {s.threshold:.6g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _pair_taus(xi: np.ndarray, pairs) -> np.ndarray:
    size = xi.shape[0]
    out = np.empty(len(pairs))
    for r, (a, b) in enumerate(pairs):
        c, d = count_pairs(xi[:, a], xi[:, b])
        out[r] = tau_from_counts(c, d, size)
    return out


def best_split(sample: Sample, box: Box, config: TreeConfig, pairs=None,
               n_total: int | None = None, rows: np.ndarray | None = None) -> Split | None:
    """Best admissible split of the box, or ``None`` when no split is admissible."""
    pairs = pair_list(sample.p) if pairs is None else pairs
    n_total = sample.n if n_total is None else n_total
    rows = np.flatnonzero(box.contains(sample.xj)) if rows is None else rows
    size = rows.size
    min_count = config.min_count(n_total)
    if size < 2 * min_count:
        return None
    xi = sample.xi[rows]
    xj = sample.xj[rows]
    best = None
    best_crit = -np.inf
    for r, (a, b) in enumerate(pairs):
        for k in range(sample.q):
            order = np.argsort(xj[:, k], kind="stable")
            xs = xj[order, k]
            prefix, suffix = _kernels.split_balances(
                np.ascontiguousarray(xi[order, a]), np.ascontiguousarray(xi[order, b]))
            cut = np.arange(1, size)
            ok = (xs[:-1] < xs[1:]) & (np.minimum(cut, size - cut) >= min_count)
            if not ok.any():
                continue
            L = cut[ok]
            tau_left = tau_from_counts(prefix[L], 0, L)
            tau_right = tau_from_counts(suffix[L], 0, size - L)
            diff = np.abs(tau_left - tau_right)
            crit = diff + config.alpha * np.minimum(L, size - L) / n_total
            i = int(np.argmax(crit))
            if crit[i] > best_crit:
                best_crit = float(crit[i])
                best = Split(pair=(int(a), int(b)), coord=k, threshold=float(xs[L[i] - 1]),
                             diff=float(diff[i]), criterion=best_crit,
                             left_count=int(L[i]), right_count=int(size - L[i]))
    return best


def _grow(sample, box, rows, depth, config, pairs, n_total) -> Node:
    node = Node(box=box, tau=_pair_taus(sample.xi[rows], pairs), count=int(rows.size), depth=depth)
    if depth >= config.max_depth:
        return node
    split = best_split(sample, box, config, pairs, n_total, rows)
    if split is None or split.diff < config.min_cut:
        return node
    below = sample.xj[rows, split.coord] <= split.threshold
    node.split = split
    node.left = _grow(sample, box.restrict(split.coord, Interval(-math.inf, split.threshold)),
                      rows[below], depth + 1, config, pairs, n_total)
    node.right = _grow(sample, box.restrict(split.coord, Interval(split.threshold, math.inf)),
                       rows[~below], depth + 1, config, pairs, n_total)
    return node


def cut_ckt(sample: Sample, config: TreeConfig | None = None, pairs=None) -> DependenceTree:
    """Grow the dependence tree on the whole conditioning space."""
    config = TreeConfig() if config is None else config
    if config.min_size * sample.n < 2:
        raise ValidationError(
            f"min_size * n = {config.min_size * sample.n:g} must be at least 2 so that every box "
            "can hold a Kendall's tau estimate")
    pairs = pair_list(sample.p) if pairs is None else pairs
    root = _grow(sample, Box.universal(sample.q), np.arange(sample.n), 0, config, pairs, sample.n)
    return DependenceTree(root, list(pairs), config, sample.n,
                          sample.conditioned_names, sample.conditioning_names)


def leaves(tree: DependenceTree) -> BoxFamily:
    """Leaf boxes, left to right; they partition the conditioning space."""
    nodes = tree.leaves()
    labels = [node.box.describe(tree.conditioning_names) for node in nodes]
    return BoxFamily(tuple(node.box for node in nodes), disjoint=True, labels=labels)


def is_binary_search_in_tau(tree: DependenceTree) -> bool:
    """At every split, lower box tau >= parent tau >= upper box tau for the split pair."""
    for node in tree.root.iter_nodes():
        if node.is_leaf:
            continue
        r = [tuple(p) for p in tree.pairs].index(tuple(node.split.pair))
        if not (node.left.tau[r] >= node.tau[r] >= node.right.tau[r]):
            return False
    return True
