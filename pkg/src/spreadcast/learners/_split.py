"""Numba kernels for exact greedy split search and leaf routing.

Split scores are written in sum-ratio form so the regression criterion and
the second-order boosting criterion share one kernel: maximizing
``st(A_L)^2/(B_L+lam) + st(A_R)^2/(B_R+lam)`` is equivalent to maximizing the
weighted-variance decrease when ``a = w*y``, ``b = w``, ``lam = alpha = 0``,
and to the regularized second-order gain when ``a = g``, ``b = h``.
Candidate thresholds are midpoints between consecutive distinct sorted
values; rows missing the split feature follow the default direction that
maximizes the score. Ties keep the lowest feature index, then the lowest
threshold (features are scanned in ascending index order with a strict
greater-than test).
"""

from __future__ import annotations

import numpy as np
from numba import njit

NO_SPLIT = -1


@njit(cache=True, nogil=True)
def _soft_threshold(x, alpha):
    if alpha <= 0.0:
        return x
    if x > alpha:
        return x - alpha
    if x < -alpha:
        return x + alpha
    return 0.0


@njit(cache=True, nogil=True)
def node_score_additive(a_sum, b_sum, lam, alpha):
    denom = b_sum + lam
    if denom <= 0.0:
        return 0.0
    t = _soft_threshold(a_sum, alpha)
    return t * t / denom


@njit(cache=True, nogil=True)
def best_split_additive(X, rows, feats, a, b, min_leaf, lam, alpha):
    """Best (feature, threshold, missing-direction) for an additive score.

    Returns (feature, threshold, miss_left, score); feature == NO_SPLIT when
    no admissible split exists. ``a`` and ``b`` are aligned with X's rows.
    """
    n = rows.shape[0]
    best_feat = NO_SPLIT
    best_thr = np.nan
    best_miss_left = True
    best_score = -np.inf

    col = np.empty(n, dtype=np.float64)
    a_obs = np.empty(n, dtype=np.float64)
    b_obs = np.empty(n, dtype=np.float64)

    for fi in range(feats.shape[0]):
        f = feats[fi]
        n_obs = 0
        a_miss = 0.0
        b_miss = 0.0
        n_miss = 0
        for k in range(n):
            r = rows[k]
            v = X[r, f]
            if np.isnan(v):
                a_miss += a[r]
                b_miss += b[r]
                n_miss += 1
            else:
                col[n_obs] = v
                a_obs[n_obs] = a[r]
                b_obs[n_obs] = b[r]
                n_obs += 1
        if n_obs < 2:
            continue

        order = np.argsort(col[:n_obs])
        a_tot = a_miss
        b_tot = b_miss
        for k in range(n_obs):
            a_tot += a_obs[k]
            b_tot += b_obs[k]

        a_left = 0.0
        b_left = 0.0
        for k in range(n_obs - 1):
            idx = order[k]
            a_left += a_obs[idx]
            b_left += b_obs[idx]
            v = col[idx]
            v_next = col[order[k + 1]]
            if v == v_next:
                continue
            thr = v + 0.5 * (v_next - v)
            n_left = k + 1
            n_right = n_obs - n_left
            # missing rows follow the default direction; try both
            for miss_left_flag in range(2):
                miss_left = miss_left_flag == 0
                if miss_left:
                    cl = n_left + n_miss
                    cr = n_right
                    al = a_left + a_miss
                    bl = b_left + b_miss
                else:
                    cl = n_left
                    cr = n_right + n_miss
                    al = a_left
                    bl = b_left
                if cl < min_leaf or cr < min_leaf:
                    continue
                ar = a_tot - al
                br = b_tot - bl
                score = node_score_additive(al, bl, lam, alpha) + node_score_additive(
                    ar, br, lam, alpha
                )
                if score > best_score:
                    best_score = score
                    best_feat = f
                    best_thr = thr
                    best_miss_left = miss_left

    return best_feat, best_thr, best_miss_left, best_score


@njit(cache=True, nogil=True)
def node_score_gini(class_sums, w_sum):
    if w_sum <= 0.0:
        return 0.0
    s = 0.0
    for c in range(class_sums.shape[0]):
        s += class_sums[c] * class_sums[c]
    return s / w_sum


@njit(cache=True, nogil=True)
def best_split_gini(X, rows, feats, y_class, w, n_classes, min_leaf):
    """Best split maximizing the weighted Gini decrease.

    Equivalent sum-ratio form: maximize sum_c CW_Lc^2/W_L + sum_c CW_Rc^2/W_R.
    Returns (feature, threshold, miss_left, score).
    """
    n = rows.shape[0]
    best_feat = NO_SPLIT
    best_thr = np.nan
    best_miss_left = True
    best_score = -np.inf

    col = np.empty(n, dtype=np.float64)
    w_obs = np.empty(n, dtype=np.float64)
    c_obs = np.empty(n, dtype=np.int64)
    cw_miss = np.zeros(n_classes, dtype=np.float64)
    cw_tot = np.zeros(n_classes, dtype=np.float64)
    cw_left = np.zeros(n_classes, dtype=np.float64)
    cw_l = np.zeros(n_classes, dtype=np.float64)
    cw_r = np.zeros(n_classes, dtype=np.float64)

    for fi in range(feats.shape[0]):
        f = feats[fi]
        n_obs = 0
        n_miss = 0
        w_miss = 0.0
        for c in range(n_classes):
            cw_miss[c] = 0.0
            cw_tot[c] = 0.0
        w_tot = 0.0
        for k in range(n):
            r = rows[k]
            v = X[r, f]
            if np.isnan(v):
                cw_miss[y_class[r]] += w[r]
                w_miss += w[r]
                n_miss += 1
            else:
                col[n_obs] = v
                w_obs[n_obs] = w[r]
                c_obs[n_obs] = y_class[r]
                n_obs += 1
            cw_tot[y_class[r]] += w[r]
            w_tot += w[r]
        if n_obs < 2:
            continue

        order = np.argsort(col[:n_obs])
        for c in range(n_classes):
            cw_left[c] = 0.0
        w_left = 0.0
        for k in range(n_obs - 1):
            idx = order[k]
            cw_left[c_obs[idx]] += w_obs[idx]
            w_left += w_obs[idx]
            v = col[idx]
            v_next = col[order[k + 1]]
            if v == v_next:
                continue
            thr = v + 0.5 * (v_next - v)
            n_left = k + 1
            n_right = n_obs - n_left
            for miss_left_flag in range(2):
                miss_left = miss_left_flag == 0
                if miss_left:
                    cl = n_left + n_miss
                    cr = n_right
                    wl = w_left + w_miss
                    for c in range(n_classes):
                        cw_l[c] = cw_left[c] + cw_miss[c]
                else:
                    cl = n_left
                    cr = n_right + n_miss
                    wl = w_left
                    for c in range(n_classes):
                        cw_l[c] = cw_left[c]
                if cl < min_leaf or cr < min_leaf:
                    continue
                wr = w_tot - wl
                for c in range(n_classes):
                    cw_r[c] = cw_tot[c] - cw_l[c]
                score = node_score_gini(cw_l, wl) + node_score_gini(cw_r, wr)
                if score > best_score:
                    best_score = score
                    best_feat = f
                    best_thr = thr
                    best_miss_left = miss_left

    return best_feat, best_thr, best_miss_left, best_score


@njit(cache=True, nogil=True)
def route_rows(children_left, children_right, children_default, feature, threshold, X):
    """Leaf index reached by every row of X (NaN follows the default child)."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while children_left[node] != -1:
            f = feature[node]
            v = X[i, f]
            if np.isnan(v):
                node = children_default[node]
            elif v < threshold[node]:
                node = children_left[node]
            else:
                node = children_right[node]
        out[i] = node
    return out
