"""Decision trees grown by information gain; majority-vote random forest.

Trees split on midpoint thresholds between consecutive sorted unique
feature values, choosing the (feature, threshold) pair with maximal
mutual information between the split and the labels. A sample sitting
exactly on a threshold goes left. Forests grow each tree on a bootstrap
resample with a fresh random feature subset per node and predict by
majority vote with ties broken toward the lowest class ordinal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

DEFAULT_N_TREES = 128
DEFAULT_MAX_DEPTH = 32


def _entropy_from_counts(counts) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def mutual_information(labels_left, labels_right) -> float:
    """Information gain in bits of splitting the parent into these children."""
    left = np.asarray(labels_left)
    right = np.asarray(labels_right)
    n = left.size + right.size
    if n == 0:
        raise ValueError("both sides of the split are empty")
    parent = np.concatenate([left, right])
    values = np.unique(parent)
    parent_counts = np.array([(parent == v).sum() for v in values])
    left_counts = np.array([(left == v).sum() for v in values])
    right_counts = parent_counts - left_counts
    return (
        _entropy_from_counts(parent_counts)
        - left.size / n * _entropy_from_counts(left_counts)
        - right.size / n * _entropy_from_counts(right_counts)
    )


@dataclass
class TreeNode:
    """Internal node (feature, threshold, two children) or leaf (klass)."""

    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    klass: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return self.klass is not None


def _majority(y) -> int:
    counts = np.bincount(y)
    return int(np.argmax(counts))  # first max = lowest ordinal


def _best_split(X, y, features, min_leaf, class_values):
    """Best (gain, feature, threshold) over candidate midpoints; None if no split."""
    n = y.size
    onehot_all = y[:, None] == class_values[None, :]
    parent_counts = onehot_all.sum(axis=0)
    parent_entropy = _entropy_from_counts(parent_counts)
    best = None
    for f in features:
        values = X[:, f]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        boundaries = np.flatnonzero(sv[1:] != sv[:-1]) + 1  # left-side sizes
        if boundaries.size == 0:
            continue
        if min_leaf > 1:
            boundaries = boundaries[(boundaries >= min_leaf) & (n - boundaries >= min_leaf)]
            if boundaries.size == 0:
                continue
        prefix = np.cumsum(onehot_all[order], axis=0)
        left_counts = prefix[boundaries - 1]
        right_counts = parent_counts[None, :] - left_counts
        n_left = boundaries.astype(np.float64)
        n_right = n - n_left

        def entropies(count_rows, sizes):
            with np.errstate(divide="ignore", invalid="ignore"):
                p = count_rows / sizes[:, None]
                terms = np.where(count_rows > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
            return -terms.sum(axis=1)

        gains = (
            parent_entropy
            - (n_left / n) * entropies(left_counts, n_left)
            - (n_right / n) * entropies(right_counts, n_right)
        )
        k = int(np.argmax(gains))  # thresholds ascend, first max = lowest threshold
        gain = float(gains[k])
        if best is None or gain > best[0]:
            b = boundaries[k]
            threshold = (sv[b - 1] + sv[b]) / 2.0
            best = (gain, int(f), float(threshold))
    return best


def grow_tree(
    X,
    y,
    max_depth: Optional[int] = DEFAULT_MAX_DEPTH,
    min_leaf: int = 1,
    max_features: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> TreeNode:
    """Grow one decision tree; ``max_features`` samples a fresh feature
    subset at every node (None uses all features)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be a nonempty 2-D matrix with one label per row")
    if max_features is not None and rng is None:
        rng = np.random.default_rng(0)
    d = X.shape[1]
    class_values = np.unique(y)

    def build(idx, depth):
        labels = y[idx]
        if (
            np.all(labels == labels[0])
            or (max_depth is not None and depth >= max_depth)
            or labels.size < 2 * min_leaf
        ):
            return TreeNode(klass=_majority(labels))
        if max_features is not None and max_features < d:
            features = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            features = np.arange(d)
        split = _best_split(X[idx], labels, features, min_leaf, class_values)
        if split is None:  # all sampled features constant here
            return TreeNode(klass=_majority(labels))
        _, feature, threshold = split
        go_left = X[idx, feature] <= threshold
        left = build(idx[go_left], depth + 1)
        right = build(idx[~go_left], depth + 1)
        return TreeNode(feature=feature, threshold=threshold, left=left, right=right)

    return build(np.arange(X.shape[0]), 0)


def predict_tree(tree: TreeNode, x) -> int:
    """Descend the tree; samples exactly on a threshold go left."""
    x = np.asarray(x, dtype=np.float64)
    node = tree
    while not node.is_leaf:
        if node.feature >= x.shape[0]:
            raise ValueError(f"sample has {x.shape[0]} features, tree needs {node.feature + 1}")
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.klass


def tree_depth(tree: TreeNode) -> int:
    if tree.is_leaf:
        return 0
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


@dataclass(frozen=True)
class Forest:
    trees: tuple
    n_trees: int
    max_depth: Optional[int]
    max_features: Optional[int]
    seed: int

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("a forest needs at least one tree")


def resolve_max_features(spec, d: int) -> Optional[int]:
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, int(math.isqrt(d)))
    return max(1, int(spec))


def train_forest(
    X,
    y,
    n_trees: int = DEFAULT_N_TREES,
    max_depth: Optional[int] = DEFAULT_MAX_DEPTH,
    max_features="sqrt",
    min_leaf: int = 1,
    bootstrap: bool = True,
    seed: int = 0,
    feature_sampling: str = "node",
) -> Forest:
    """Grow ``n_trees`` trees on bootstrap resamples of (X, y).

    Per-tree RNGs are derived from (seed, tree index), so results are
    reproducible and independent of growing order. ``feature_sampling``
    chooses whether the random feature subset is redrawn per node or
    fixed per tree.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("training data is empty")
    if feature_sampling not in ("node", "tree"):
        raise ValueError(f"unknown feature_sampling {feature_sampling!r}")
    d = X.shape[1]
    k = resolve_max_features(max_features, d)
    n = X.shape[0]
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        if bootstrap:
            idx = rng.integers(0, n, size=n)
            Xt, yt = X[idx], y[idx]
        else:
            Xt, yt = X, y
        if k is not None and feature_sampling == "tree":
            subset = np.sort(rng.choice(d, size=min(k, d), replace=False))
            tree = grow_tree(
                Xt[:, subset], yt, max_depth=max_depth, min_leaf=min_leaf, rng=rng
            )
            _remap_features(tree, subset)
        else:
            tree = grow_tree(
                Xt, yt, max_depth=max_depth, min_leaf=min_leaf, max_features=k, rng=rng
            )
        trees.append(tree)
    return Forest(
        trees=tuple(trees),
        n_trees=n_trees,
        max_depth=max_depth,
        max_features=k,
        seed=seed,
    )


def _remap_features(tree: TreeNode, subset) -> None:
    if tree.is_leaf:
        return
    tree.feature = int(subset[tree.feature])
    _remap_features(tree.left, subset)
    _remap_features(tree.right, subset)


def predict_forest(forest: Forest, x) -> int:
    """Majority vote over trees; ties go to the lowest class ordinal."""
    if not forest.trees:
        raise ValueError("empty forest")
    votes = [predict_tree(tree, x) for tree in forest.trees]
    return int(np.argmax(np.bincount(votes)))


def predict_forest_batch(forest: Forest, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.array([predict_forest(forest, row) for row in X], dtype=np.int64)


def _node_to_obj(node: TreeNode):
    if node.is_leaf:
        return {"c": node.klass}
    return {
        "f": node.feature,
        "t": node.threshold,
        "l": _node_to_obj(node.left),
        "r": _node_to_obj(node.right),
    }


def _node_from_obj(obj) -> TreeNode:
    if "c" in obj:
        return TreeNode(klass=int(obj["c"]))
    return TreeNode(
        feature=int(obj["f"]),
        threshold=float(obj["t"]),
        left=_node_from_obj(obj["l"]),
        right=_node_from_obj(obj["r"]),
    )


def save_forest(forest: Forest, path) -> None:
    obj = {
        "format": "radiofp-forest-v1",
        "n_trees": forest.n_trees,
        "max_depth": forest.max_depth,
        "max_features": forest.max_features,
        "seed": forest.seed,
        "trees": [_node_to_obj(tree) for tree in forest.trees],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_forest(path) -> Forest:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("format") != "radiofp-forest-v1":
        raise ValueError(f"{path}: not a radiofp forest file")
    return Forest(
        trees=tuple(_node_from_obj(t) for t in obj["trees"]),
        n_trees=int(obj["n_trees"]),
        max_depth=obj["max_depth"],
        max_features=obj["max_features"],
        seed=int(obj["seed"]),
    )
