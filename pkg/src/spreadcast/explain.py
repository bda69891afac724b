"""Exact per-prediction attribution for tree ensembles and linear models.

Tree attribution uses the polynomial-time path recursion over decision
paths, weighting branches by the training cover stored at fit time, so
each feature's value is its exact Shapley contribution under the
path-dependent feature-removal convention. Linear attribution is the
closed form coef * (x - background mean). Monthly attribution matrices
aggregate into a ranked importance report: mean signed value (direction)
and mean absolute value (magnitude) per month, averaged unweighted across
months for the full-sample view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from numba import njit

from .learners.boosting import (
    AdaBoostR2Regressor,
    GradientBoostingSpreadRegressor,
    SecondOrderBoostingClassifier,
    SecondOrderBoostingRegressor,
)
from .learners.forest import RandomForestRatingClassifier, RandomForestSpreadRegressor
from .learners.linear import PenalizedLinearRegression
from .learners.tree import Tree


class ExplainError(ValueError):
    pass


@dataclass(frozen=True)
class ShapVector:
    """Attribution of one prediction: base + sum(contributions) = prediction."""

    base_value: float
    contributions: np.ndarray
    prediction: float


# ---------------------------------------------------------------------------
# path recursion


@njit(cache=True, nogil=True)
def _extend_path(fi, zf, of, pw, depth, zero_fraction, one_fraction, feat):
    fi[depth] = feat
    zf[depth] = zero_fraction
    of[depth] = one_fraction
    pw[depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[i + 1] += one_fraction * pw[i] * (i + 1.0) / (depth + 1.0)
        pw[i] = zero_fraction * pw[i] * (depth - i) / (depth + 1.0)


@njit(cache=True, nogil=True)
def _unwind_path(fi, zf, of, pw, depth, pos):
    one_fraction = of[pos]
    zero_fraction = zf[pos]
    carry = pw[depth]
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = pw[i]
            pw[i] = carry * (depth + 1.0) / ((i + 1.0) * one_fraction)
            carry = tmp - pw[i] * zero_fraction * (depth - i) / (depth + 1.0)
        else:
            pw[i] = pw[i] * (depth + 1.0) / (zero_fraction * (depth - i))
    for i in range(pos, depth):
        fi[i] = fi[i + 1]
        zf[i] = zf[i + 1]
        of[i] = of[i + 1]


@njit(cache=True, nogil=True)
def _unwound_sum(fi, zf, of, pw, depth, pos):
    one_fraction = of[pos]
    zero_fraction = zf[pos]
    carry = pw[depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = carry * (depth + 1.0) / ((i + 1.0) * one_fraction)
            total += tmp
            carry = pw[i] - tmp * zero_fraction * (depth - i) / (depth + 1.0)
        else:
            total += pw[i] / zero_fraction / ((depth - i) / (depth + 1.0))
    return total


@njit(cache=True, nogil=True)
def _shap_recurse(
    cl, cr, cd, feat, thr, expected, cover, x, phi,
    node, depth, p_fi, p_zf, p_of, p_pw,
    parent_zero_fraction, parent_one_fraction, parent_feature,
):
    fi = p_fi[depth + 1 :]
    zf = p_zf[depth + 1 :]
    of = p_of[depth + 1 :]
    pw = p_pw[depth + 1 :]
    for i in range(depth + 1):
        fi[i] = p_fi[i]
        zf[i] = p_zf[i]
        of[i] = p_of[i]
        pw[i] = p_pw[i]
    _extend_path(fi, zf, of, pw, depth, parent_zero_fraction,
                 parent_one_fraction, parent_feature)

    if cl[node] == -1:
        for i in range(1, depth + 1):
            w = _unwound_sum(fi, zf, of, pw, depth, i)
            phi[fi[i]] += w * (of[i] - zf[i]) * expected[node]
        return

    split = feat[node]
    v = x[split]
    if np.isnan(v):
        hot = cd[node]
    elif v < thr[node]:
        hot = cl[node]
    else:
        hot = cr[node]
    cold = cr[node] if hot == cl[node] else cl[node]
    w_node = cover[node]
    hot_zero = cover[hot] / w_node
    cold_zero = cover[cold] / w_node
    incoming_zero = 1.0
    incoming_one = 1.0

    pos = 0
    while pos <= depth:
        if fi[pos] == split:
            break
        pos += 1
    if pos != depth + 1:
        incoming_zero = zf[pos]
        incoming_one = of[pos]
        _unwind_path(fi, zf, of, pw, depth, pos)
        depth -= 1

    _shap_recurse(
        cl, cr, cd, feat, thr, expected, cover, x, phi,
        hot, depth + 1, fi, zf, of, pw,
        hot_zero * incoming_zero, incoming_one, split,
    )
    _shap_recurse(
        cl, cr, cd, feat, thr, expected, cover, x, phi,
        cold, depth + 1, fi, zf, of, pw,
        cold_zero * incoming_zero, 0.0, split,
    )


def _node_expectations(tree: Tree, values: np.ndarray) -> np.ndarray:
    """Cover-weighted subtree means; children always follow their parent."""
    out = values.astype(np.float64).copy()
    cl, cr, cov = tree.children_left, tree.children_right, tree.cover
    for node in range(tree.n_nodes - 1, -1, -1):
        if cl[node] != -1:
            wl, wr = cov[cl[node]], cov[cr[node]]
            if wl + wr <= 0:
                raise ExplainError("tree lacks positive cover counts")
            out[node] = (wl * out[cl[node]] + wr * out[cr[node]]) / (wl + wr)
    return out


def _tree_depth(tree: Tree) -> int:
    depth = np.zeros(tree.n_nodes, dtype=np.int64)
    best = 0
    for node in range(tree.n_nodes):
        if tree.children_left[node] != -1:
            d = depth[node] + 1
            depth[tree.children_left[node]] = d
            depth[tree.children_right[node]] = d
            best = max(best, d)
    return best


def _single_tree_shap(tree: Tree, values: np.ndarray, X: np.ndarray) -> tuple:
    expected = _node_expectations(tree, values)
    max_depth = _tree_depth(tree)
    s = (max_depth + 2) * (max_depth + 3) // 2
    n, m = X.shape
    phi = np.zeros((n, m))
    for i in range(n):
        fi = np.empty(s, dtype=np.int64)
        zf = np.empty(s, dtype=np.float64)
        of = np.empty(s, dtype=np.float64)
        pw = np.empty(s, dtype=np.float64)
        _shap_recurse(
            tree.children_left, tree.children_right, tree.children_default,
            tree.feature, tree.threshold, expected, tree.cover,
            X[i], phi[i], 0, 0, fi, zf, of, pw, 1.0, 1.0, -1,
        )
    return phi, float(expected[0])


def _weighted_trees(model, class_index):
    """(tree, leaf values, weight) triples plus the additive offset."""
    if isinstance(model, RandomForestSpreadRegressor):
        w = 1.0 / len(model.trees_)
        return [(t, t.value, w) for t in model.trees_], 0.0
    if isinstance(model, (GradientBoostingSpreadRegressor, SecondOrderBoostingRegressor)):
        lr = model.learning_rate
        return [(t, t.value, lr) for t in model.trees_], model.base_score_
    if isinstance(model, AdaBoostR2Regressor):
        total = float(np.sum(model.round_weights_))
        return [
            (t, t.value, float(a) / total)
            for t, a in zip(model.trees_, model.round_weights_)
        ], 0.0
    if isinstance(model, RandomForestRatingClassifier):
        if class_index is None:
            raise ExplainError("class_index required for classifier attribution")
        w = 1.0 / len(model.trees_)
        return [(t, t.value[:, class_index], w) for t in model.trees_], 0.0
    if isinstance(model, SecondOrderBoostingClassifier):
        if class_index is None:
            raise ExplainError("class_index required for classifier attribution")
        lr = model.learning_rate
        return [
            (stage[class_index], stage[class_index].value, lr)
            for stage in model.trees_
        ], 0.0
    raise ExplainError(f"no tree attribution for {type(model).__name__}")


def shap_values(model, X, class_index=None, background_means=None):
    """Per-row contributions and the shared base value.

    Tree ensembles use the exact path recursion; linear models the closed
    form (``background_means`` required, typically training-window feature
    means). For classifiers pass ``class_index`` to attribute that class's
    margin. Returns (contributions (n, m), base_value).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if isinstance(model, PenalizedLinearRegression):
        if background_means is None:
            raise ExplainError("background_means required for linear attribution")
        mu = np.asarray(background_means, dtype=np.float64)
        if mu.shape[0] != model.n_features_in_:
            raise ExplainError("background means length mismatch")
        filled = np.nan_to_num(X, nan=0.0)
        contribs = model.coef_ * (filled - mu)
        base = float(model.intercept_ + mu @ model.coef_)
        return contribs, base

    trees = _weighted_trees(model, class_index)
    triples, offset = trees
    contribs = np.zeros(X.shape)
    base = offset
    for tree, values, weight in triples:
        phi, root = _single_tree_shap(tree, values, X)
        contribs += weight * phi
        base += weight * root
    return contribs, float(base)


def tree_shap(model, x, class_index=None) -> ShapVector:
    """Exact attribution of a single tree-ensemble prediction."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    contribs, base = shap_values(model, x, class_index=class_index)
    return ShapVector(
        base_value=base,
        contributions=contribs[0],
        prediction=float(base + contribs[0].sum()),
    )


def linear_shap(model, x, background_means) -> ShapVector:
    """Closed-form attribution: coef_j * (x_j - background mean_j)."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    contribs, base = shap_values(model, x, background_means=background_means)
    return ShapVector(
        base_value=base,
        contributions=contribs[0],
        prediction=float(base + contribs[0].sum()),
    )


# ---------------------------------------------------------------------------
# importance aggregation


@dataclass(frozen=True)
class ImportanceReport:
    """Monthly and full-sample feature importance from attribution values."""

    feature_names: list[str]
    feature_groups: list[str] | None
    monthly_mean: pd.DataFrame  # month x feature, signed means
    monthly_mean_abs: pd.DataFrame  # month x feature, mean |value|
    mean_shap: np.ndarray  # full-sample signed mean (average of months)
    mean_abs_shap: np.ndarray  # full-sample magnitude (average of months)
    ranking: np.ndarray  # feature indices, descending magnitude

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for rank, j in enumerate(self.ranking, start=1):
            rows.append(
                {
                    "rank": rank,
                    "feature": self.feature_names[j],
                    "group": self.feature_groups[j] if self.feature_groups else "",
                    "contribution": self.mean_abs_shap[j],
                    "mean_shap": self.mean_shap[j],
                }
            )
        return pd.DataFrame(rows)


def aggregate_importance(
    monthly_contributions: dict[int, np.ndarray],
    feature_names: list[str],
    feature_groups: list[str] | None = None,
) -> ImportanceReport:
    """Fold per-month attribution matrices into a ranked report.

    ``monthly_contributions`` maps a month index to the (rows, features)
    contribution matrix computed on that month's validation rows. Months
    enter the full-sample averages with equal weight; ranking is by
    descending full-sample mean |value| with ties broken by feature id.
    """
    if not monthly_contributions:
        raise ExplainError("no monthly attribution matrices supplied")
    months = sorted(monthly_contributions)
    m = len(feature_names)
    mean_rows, abs_rows = [], []
    for t in months:
        mat = np.asarray(monthly_contributions[t], dtype=np.float64)
        if mat.ndim != 2 or mat.shape[1] != m:
            raise ExplainError(f"month {t} matrix has wrong shape {mat.shape}")
        mean_rows.append(mat.mean(axis=0))
        abs_rows.append(np.abs(mat).mean(axis=0))
    monthly_mean = pd.DataFrame(mean_rows, index=months, columns=feature_names)
    monthly_abs = pd.DataFrame(abs_rows, index=months, columns=feature_names)
    mean_shap = monthly_mean.to_numpy().mean(axis=0)
    mean_abs = monthly_abs.to_numpy().mean(axis=0)
    ranking = np.array(
        sorted(range(m), key=lambda j: (-mean_abs[j], feature_names[j])),
        dtype=np.intp,
    )
    return ImportanceReport(
        feature_names=list(feature_names),
        feature_groups=list(feature_groups) if feature_groups is not None else None,
        monthly_mean=monthly_mean,
        monthly_mean_abs=monthly_abs,
        mean_shap=mean_shap,
        mean_abs_shap=mean_abs,
        ranking=ranking,
    )
