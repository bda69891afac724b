"""Greedy CART trees with native missing-value routing.

Trees are stored as flat parallel arrays (children, feature, threshold,
value, cover) so prediction, serialization, and attribution all walk the
same structure. Regression trees maximize weighted-variance decrease,
classification trees weighted Gini decrease, and boosted trees the
regularized second-order gain; all three share the split kernels in
``_split``. Rows missing the split feature follow the learned default
direction. Candidate thresholds are midpoints between consecutive distinct
values, and gain ties keep the lowest feature index then lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._split import (
    NO_SPLIT,
    best_split_additive,
    best_split_gini,
    node_score_additive,
    node_score_gini,
    route_rows,
)

_GAIN_RTOL = 1e-12


@dataclass
class Tree:
    """Flat binary decision tree; -1 children mark leaves."""

    children_left: np.ndarray
    children_right: np.ndarray
    children_default: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    value: np.ndarray  # (n_nodes,) or (n_nodes, n_classes); leaf payloads
    cover: np.ndarray  # training weight reaching each node
    n_samples: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.children_left)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.children_left == -1))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for every row of X."""
        return route_rows(
            self.children_left,
            self.children_right,
            self.children_default,
            self.feature,
            self.threshold,
            np.ascontiguousarray(X, dtype=np.float64),
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


class _TreeFrame:
    """Mutable node arrays while a tree is growing."""

    def __init__(self, value_width: int):
        self.children_left: list[int] = []
        self.children_right: list[int] = []
        self.children_default: list[int] = []
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.value: list = []
        self.cover: list[float] = []
        self.n_samples: list[int] = []
        self.value_width = value_width

    def add_node(self, value, cover: float, n_samples: int) -> int:
        self.children_left.append(-1)
        self.children_right.append(-1)
        self.children_default.append(-1)
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.value.append(value)
        self.cover.append(cover)
        self.n_samples.append(n_samples)
        return len(self.children_left) - 1

    def set_split(self, node, feat, thr, left, right, default):
        self.feature[node] = int(feat)
        self.threshold[node] = float(thr)
        self.children_left[node] = left
        self.children_right[node] = right
        self.children_default[node] = default

    def freeze(self, n_features: int) -> Tree:
        if self.value_width == 1:
            value = np.asarray(self.value, dtype=np.float64)
        else:
            value = np.asarray(self.value, dtype=np.float64).reshape(
                -1, self.value_width
            )
        return Tree(
            children_left=np.asarray(self.children_left, dtype=np.int64),
            children_right=np.asarray(self.children_right, dtype=np.int64),
            children_default=np.asarray(self.children_default, dtype=np.int64),
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            value=value,
            cover=np.asarray(self.cover, dtype=np.float64),
            n_samples=np.asarray(self.n_samples, dtype=np.int64),
            n_features=n_features,
        )


def _sample_features(rng, n_features: int, q: int) -> np.ndarray:
    if q >= n_features:
        return np.arange(n_features, dtype=np.int64)
    chosen = rng.choice(n_features, size=q, replace=False)
    return np.sort(chosen).astype(np.int64)


def _partition(X, rows, feat, thr, miss_left):
    col = X[rows, feat]
    go_left = col < thr
    if miss_left:
        go_left |= np.isnan(col)
    return rows[go_left], rows[~go_left]


def _grow(X, rows, params, rng, *, find_split, leaf_value, node_stats):
    """Depth-first growth shared by the three criteria."""
    max_depth = params.get("max_depth")
    if max_depth is None:
        max_depth = np.iinfo(np.int32).max
    min_leaf = params["min_leaf"]
    q = params["q"]
    frame = _TreeFrame(params.get("value_width", 1))

    stats_root = node_stats(rows)
    root = frame.add_node(*leaf_value(rows, stats_root))
    stack = [(root, rows, 0, stats_root)]
    while stack:
        node, node_rows, depth, stats = stack.pop()
        if depth >= max_depth or len(node_rows) < 2 * min_leaf:
            continue
        feats = _sample_features(rng, X.shape[1], q)
        feat, thr, miss_left, score, parent_score = find_split(
            node_rows, feats, stats
        )
        if feat == NO_SPLIT:
            continue
        gain = score - parent_score
        if gain <= _GAIN_RTOL * max(1.0, abs(parent_score)):
            continue
        if params.get("gamma", 0.0) > 0.0 and 0.5 * gain - params["gamma"] <= 0.0:
            continue
        left_rows, right_rows = _partition(X, node_rows, feat, thr, miss_left)
        stats_l = node_stats(left_rows)
        stats_r = node_stats(right_rows)
        left = frame.add_node(*leaf_value(left_rows, stats_l))
        right = frame.add_node(*leaf_value(right_rows, stats_r))
        frame.set_split(node, feat, thr, left, right, left if miss_left else right)
        stack.append((right, right_rows, depth + 1, stats_r))
        stack.append((left, left_rows, depth + 1, stats_l))
    return frame.freeze(X.shape[1])


def fit_regression_tree(
    X,
    y,
    weights=None,
    *,
    max_depth=None,
    min_leaf=1,
    q=None,
    rng=None,
) -> Tree:
    """CART regression tree: weighted-variance split, weighted-mean leaves."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    q = _check_q(q, m)
    rng = rng or np.random.default_rng(0)
    a = w * y
    b = w.copy()
    rows = np.arange(n, dtype=np.int64)

    def node_stats(node_rows):
        return float(a[node_rows].sum()), float(b[node_rows].sum())

    def leaf_value(node_rows, stats):
        a_sum, b_sum = stats
        mean = a_sum / b_sum if b_sum > 0 else 0.0
        return mean, b_sum, len(node_rows)

    def find_split(node_rows, feats, stats):
        a_sum, b_sum = stats
        feat, thr, miss_left, score = best_split_additive(
            X, node_rows, feats, a, b, min_leaf, 0.0, 0.0
        )
        return feat, thr, miss_left, score, node_score_additive(a_sum, b_sum, 0.0, 0.0)

    params = {"max_depth": max_depth, "min_leaf": min_leaf, "q": q}
    return _grow(
        X, rows, params, rng,
        find_split=find_split, leaf_value=leaf_value, node_stats=node_stats,
    )


def fit_boosted_tree(
    X,
    grad,
    hess,
    *,
    max_depth=None,
    min_leaf=1,
    lam=0.0,
    alpha=0.0,
    gamma=0.0,
) -> Tree:
    """Second-order tree: gain on (G, H) sums, leaf = -st(G, alpha)/(H + lam)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)
    h = np.asarray(hess, dtype=np.float64)
    n, m = X.shape
    rows = np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(0)  # unused: no feature subsampling

    def node_stats(node_rows):
        return float(g[node_rows].sum()), float(h[node_rows].sum())

    def leaf_value(node_rows, stats):
        g_sum, h_sum = stats
        denom = h_sum + lam
        if denom <= 0:
            return 0.0, h_sum, len(node_rows)
        shrunk = np.sign(g_sum) * max(abs(g_sum) - alpha, 0.0) if alpha > 0 else g_sum
        return -shrunk / denom, h_sum, len(node_rows)

    def find_split(node_rows, feats, stats):
        g_sum, h_sum = stats
        feat, thr, miss_left, score = best_split_additive(
            X, node_rows, feats, g, h, min_leaf, lam, alpha
        )
        return feat, thr, miss_left, score, node_score_additive(
            g_sum, h_sum, lam, alpha
        )

    params = {
        "max_depth": max_depth,
        "min_leaf": min_leaf,
        "q": m,
        "gamma": gamma,
    }
    return _grow(
        X, rows, params, rng,
        find_split=find_split, leaf_value=leaf_value, node_stats=node_stats,
    )


def fit_classification_tree(
    X,
    y_class,
    n_classes: int,
    weights=None,
    *,
    max_depth=None,
    min_leaf=1,
    q=None,
    rng=None,
) -> Tree:
    """Gini classification tree; leaves hold weighted class frequencies."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    yc = np.asarray(y_class, dtype=np.int64)
    n, m = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    q = _check_q(q, m)
    rng = rng or np.random.default_rng(0)
    rows = np.arange(n, dtype=np.int64)

    def node_stats(node_rows):
        cw = np.bincount(yc[node_rows], weights=w[node_rows], minlength=n_classes)
        return cw, float(cw.sum())

    def leaf_value(node_rows, stats):
        cw, w_sum = stats
        freq = cw / w_sum if w_sum > 0 else np.full(n_classes, 1.0 / n_classes)
        return freq, w_sum, len(node_rows)

    def find_split(node_rows, feats, stats):
        cw, w_sum = stats
        feat, thr, miss_left, score = best_split_gini(
            X, node_rows, feats, yc, w, n_classes, min_leaf
        )
        return feat, thr, miss_left, score, node_score_gini(cw, w_sum)

    params = {
        "max_depth": max_depth,
        "min_leaf": min_leaf,
        "q": q,
        "value_width": n_classes,
    }
    return _grow(
        X, rows, params, rng,
        find_split=find_split, leaf_value=leaf_value, node_stats=node_stats,
    )


def fit_tree(
    X,
    y,
    weights=None,
    *,
    max_depth=None,
    min_leaf=1,
    q=None,
    criterion="variance",
    n_classes=None,
    rng=None,
) -> Tree:
    """Fit a single tree with the requested criterion ("variance" or "gini")."""
    if criterion == "variance":
        return fit_regression_tree(
            X, y, weights, max_depth=max_depth, min_leaf=min_leaf, q=q, rng=rng
        )
    if criterion == "gini":
        if n_classes is None:
            n_classes = int(np.max(y)) + 1
        return fit_classification_tree(
            X, y, n_classes, weights,
            max_depth=max_depth, min_leaf=min_leaf, q=q, rng=rng,
        )
    raise ValueError(f"unknown criterion {criterion!r}")


def _check_q(q, n_features: int) -> int:
    if q is None:
        return n_features
    q = int(q)
    if q < 1 or q > n_features:
        raise ValueError(f"q must be in [1, {n_features}], got {q}")
    return q
