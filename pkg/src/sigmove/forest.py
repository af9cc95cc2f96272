"""Random forest of Gini decision trees with per-split feature subsampling.

Trees are stored as flat preorder arrays; leaves keep the fraction of
positive training samples so the forest can return graded scores.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

LEAF = -1
MIN_GAIN = 1e-12
# relative slack when comparing split scores, so float noise cannot break exact ties
TIE_RTOL = 1e-13


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_features: int | None = None  # None -> floor(sqrt(p))
    max_depth: int | None = None
    min_samples_split: int = 2
    seed: int = 0
    bootstrap: bool = True

    def resolved_max_features(self, n_features: int) -> int:
        m = self.max_features if self.max_features is not None else max(1, math.isqrt(n_features))
        if not 1 <= m <= n_features:
            raise ValueError(f"max_features must lie in [1, {n_features}], got {m}")
        return m


@dataclass
class Tree:
    """Preorder node arrays. Internal nodes send ``x[feature] <= threshold`` left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf each row lands in."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.nonzero(self.feature[node] != LEAF)[0]
        while len(active):
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())


@dataclass
class ForestModel:
    trees: list[Tree]
    config: ForestConfig
    n_features: int
    n_train: int


def gini_impurity(labels) -> float:
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("gini impurity of an empty set")
    q = float(np.count_nonzero(y)) / y.size
    return 1.0 - q * q - (1.0 - q) * (1.0 - q)


def _best_split(X, y, features):
    """Best (feature, threshold, gain) among ``features`` or None.

    Maximises sum over children of ``(pos^2 + neg^2) / n``, which is the
    weighted-Gini gain up to terms fixed by the parent. Ties go to the
    lowest feature index, then the lowest threshold.
    """
    m = len(y)
    total_pos = float(y.sum())
    sub = X[:, features]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[order]
    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    n_right = m - n_left
    pos_left = np.cumsum(ys, axis=0)[:-1]
    pos_right = total_pos - pos_left
    neg_left = n_left - pos_left
    neg_right = n_right - pos_right
    score = (pos_left ** 2 + neg_left ** 2) / n_left + (pos_right ** 2 + neg_right ** 2) / n_right
    score[xs[1:] <= xs[:-1]] = -np.inf  # no threshold between equal values
    best = score.max()
    if not np.isfinite(best):
        return None
    parent = (total_pos ** 2 + (m - total_pos) ** 2) / m
    gain = (best - parent) / m
    if gain <= MIN_GAIN:
        return None
    # feature-major scan keeps the lowest (feature, threshold) among near-ties
    hits = np.nonzero((score >= best - TIE_RTOL * abs(best)).T.ravel())[0]
    col, row = divmod(int(hits[0]), m - 1)
    lo, hi = xs[row, col], xs[row + 1, col]
    threshold = (lo + hi) / 2.0
    if threshold >= hi:  # adjacent floats: midpoint rounds up
        threshold = lo
    return int(features[col]), float(threshold), float(gain)


def fit_tree(features, labels, config: ForestConfig, rng: np.random.Generator) -> Tree:
    """Grow one CART tree by recursive best-Gini splits.

    At each node ``max_features`` distinct features are drawn from ``rng``;
    candidate thresholds are midpoints between consecutive distinct values.
    Growth stops on a pure node, fewer than ``min_samples_split`` samples,
    ``max_depth``, or no split with positive gain.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if len(y) == 0:
        raise ValueError("cannot fit a tree on zero samples")
    n_features = X.shape[1]
    k = config.resolved_max_features(n_features)

    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(np.nan)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        count.append(len(idx))
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        n_pos = value[node] * len(idx)
        if (n_pos == 0 or n_pos == len(idx) or len(idx) < config.min_samples_split
                or (config.max_depth is not None and depth >= config.max_depth)):
            continue
        feats = np.sort(rng.choice(n_features, size=k, replace=False))
        split = _best_split(X[idx], y[idx], feats)
        if split is None:
            continue
        f, thr, _ = split
        go_left = X[idx, f] <= thr
        lnode = new_node(idx[go_left])
        rnode = new_node(idx[~go_left])
        feature[node], threshold[node] = f, thr
        left[node], right[node] = lnode, rnode
        # right first so the left subtree is expanded first (depth-first order)
        stack.append((rnode, idx[~go_left], depth + 1))
        stack.append((lnode, idx[go_left], depth + 1))
    return _to_preorder(Tree(np.array(feature, dtype=np.int64), np.array(threshold),
                             np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                             np.array(value), np.array(count, dtype=np.int64)))


def _to_preorder(tree: Tree) -> Tree:
    order = []
    stack = [0]
    while stack:
        i = stack.pop()
        order.append(i)
        if tree.feature[i] != LEAF:
            stack.append(int(tree.right[i]))
            stack.append(int(tree.left[i]))
    order = np.array(order, dtype=np.int64)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    internal = tree.feature[order] != LEAF
    left = np.where(internal, remap[np.where(internal, tree.left[order], 0)], LEAF)
    right = np.where(internal, remap[np.where(internal, tree.right[order], 0)], LEAF)
    return Tree(tree.feature[order], tree.threshold[order], left, right,
                tree.value[order], tree.n_samples[order])


def tree_streams(config: ForestConfig) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(config.n_trees)]


def fit_forest_arrays(X, y, config: ForestConfig) -> ForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("empty training partition")
    config.resolved_max_features(X.shape[1])
    trees = []
    for rng in tree_streams(config):
        if config.bootstrap:
            idx = rng.integers(0, n, size=n)
            trees.append(fit_tree(X[idx], y[idx], config, rng))
        else:
            trees.append(fit_tree(X, y, config, rng))
    return ForestModel(trees, config, X.shape[1], n)


def fit_forest(dataset, config: ForestConfig) -> ForestModel:
    """Fit on the training partition of a labeled dataset, one bootstrap
    sample and one independent RNG stream per tree."""
    X, y = dataset.train
    return fit_forest_arrays(X, y, config)


def forest_predict_proba(model: ForestModel, features) -> np.ndarray:
    """Mean over trees of the positive fraction in the leaf each row reaches."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got shape {X.shape}")
    total = np.zeros(len(X))
    for tree in model.trees:
        total += tree.predict_proba(X)
    return total / len(model.trees)


# -- persistence --------------------------------------------------------------
# Text format:
#   forest <json config> n_features=<int> n_train=<int>
#   tree <index> <n_nodes>
#   S <feature> <threshold> <value> <n_samples>   internal node, preorder
#   L <value> <n_samples>                         leaf
# floats are written with repr(), which round-trips exactly.


def save_forest(model: ForestModel, path) -> None:
    lines = [f"forest {json.dumps(asdict(model.config))} n_features={model.n_features} n_train={model.n_train}"]
    for t, tree in enumerate(model.trees):
        lines.append(f"tree {t} {tree.n_nodes}")
        for i in range(tree.n_nodes):
            if tree.feature[i] == LEAF:
                lines.append(f"L {float(tree.value[i])!r} {int(tree.n_samples[i])}")
            else:
                lines.append(f"S {int(tree.feature[i])} {float(tree.threshold[i])!r} "
                             f"{float(tree.value[i])!r} {int(tree.n_samples[i])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_preorder(nodes: list[tuple]) -> Tree:
    n = len(nodes)
    feature = np.full(n, LEAF, dtype=np.int64)
    threshold = np.full(n, np.nan)
    left = np.full(n, LEAF, dtype=np.int64)
    right = np.full(n, LEAF, dtype=np.int64)
    value = np.full(n, np.nan)
    count = np.zeros(n, dtype=np.int64)
    pos = 0

    def build() -> int:
        nonlocal pos
        i = pos
        pos += 1
        fields = nodes[i]
        if fields[0] == "L":
            value[i], count[i] = float(fields[1]), int(fields[2])
        else:
            feature[i], threshold[i] = int(fields[1]), float(fields[2])
            value[i], count[i] = float(fields[3]), int(fields[4])
            left[i] = build()
            right[i] = build()
        return i

    build()
    if pos != n:
        raise ValueError("malformed tree: trailing nodes")
    return Tree(feature, threshold, left, right, value, count)


def load_forest(path) -> ForestModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = lines[0]
    if not head.startswith("forest "):
        raise ValueError(f"{path}: not a forest file")
    cfg_text, tail = head[len("forest "):].rsplit(" n_features=", 1)
    n_features, n_train = tail.split(" n_train=")
    config = ForestConfig(**json.loads(cfg_text))
    trees = []
    pos = 1
    while pos < len(lines):
        _, _, count = lines[pos].split()
        count = int(count)
        nodes = [tuple(line.split()) for line in lines[pos + 1:pos + 1 + count]]
        trees.append(_parse_preorder(nodes))
        pos += 1 + count
    return ForestModel(trees, config, int(n_features), int(n_train))
