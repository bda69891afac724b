"""Spread-implied 10-class credit rating models.

Realized spreads convert to rating labels by full-sample deciles (lowest
decile = AAA, ties on a boundary fall to the lower-spread class). The
classifiers predict next month's implied class from the lagged feature
set; model selection maximizes weighted F1 on a seeded 8:1:1 split, and
K-fold cross-validation wraps that split inside each fold's remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .learners.boosting import SecondOrderBoostingClassifier
from .learners.forest import RandomForestRatingClassifier
from .panel import Panel, build_slice

RATING_CLASSES = ("AAA", "AA+", "AA", "A", "BBB", "BB", "B", "CCC", "CC", "C")
N_CLASSES = len(RATING_CLASSES)

DEFAULT_CLASSIFIER_GRIDS: dict[str, list[dict]] = {
    "rf": [
        {"n_trees": 50, "max_depth": 12},
        {"n_trees": 50, "max_depth": None},
    ],
    "xgb": [
        {"n_trees": 30, "learning_rate": 0.2, "max_depth": 4, "lam": 1.0},
    ],
}


class RatingError(ValueError):
    pass


@dataclass(frozen=True)
class RatingScale:
    """Decile boundaries over realized spreads; class 0 (AAA) = lowest."""

    boundaries: np.ndarray  # 9 non-decreasing spread quantiles

    def __post_init__(self):
        if len(self.boundaries) != N_CLASSES - 1:
            raise RatingError("a 10-class scale needs 9 boundaries")
        if np.any(np.diff(self.boundaries) < 0):
            raise RatingError("boundaries must be non-decreasing")

    def classify(self, spreads) -> np.ndarray:
        """Class per spread; a value equal to a boundary takes the lower class."""
        return np.searchsorted(
            self.boundaries, np.asarray(spreads, dtype=np.float64), side="left"
        ).astype(np.int64)


def make_scale(spreads) -> RatingScale:
    values = np.asarray(spreads, dtype=np.float64)
    values = values[np.isfinite(values)]
    if len(np.unique(values)) < N_CLASSES:
        raise RatingError(
            f"need at least {N_CLASSES} distinct spreads, got {len(np.unique(values))}"
        )
    cuts = np.quantile(values, np.arange(1, N_CLASSES) / N_CLASSES, method="linear")
    return RatingScale(boundaries=cuts)


@dataclass(frozen=True)
class LabeledRatingData:
    """Lagged features paired with next-month implied rating classes."""

    X: np.ndarray
    y: np.ndarray  # int class labels
    keys: list[tuple[str, int]]
    industry: np.ndarray
    feature_names: list[str]
    scale: RatingScale

    def __len__(self) -> int:
        return len(self.y)


def spreads_to_ratings(
    panel: Panel, scale: RatingScale | None = None, feature_set: str = "all"
) -> LabeledRatingData:
    """Label each supervised row with its realized spread's decile class."""
    if scale is None:
        scale = make_scale(panel.spread)
    sl = build_slice(panel, feature_set=feature_set)
    labels = scale.classify(sl.y)
    lookup = panel.row_lookup()
    industry = np.array(
        [panel.industry[lookup[(b, m)]] for b, m in sl.keys], dtype=object
    )
    return LabeledRatingData(
        X=sl.X,
        y=labels,
        keys=sl.keys,
        industry=industry,
        feature_names=sl.feature_names,
        scale=scale,
    )


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class RatingReport:
    accuracy: float
    recall: float  # support-weighted, equals accuracy for single-label data
    f1: float  # support-weighted
    per_class: pd.DataFrame  # precision, recall, f1, support
    confusion: np.ndarray  # rows = true class, columns = predicted
    n_obs: int
    folds: list = field(default_factory=list)
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "recall": self.recall,
            "f1": self.f1,
            "n_obs": self.n_obs,
        }


def classification_metrics(confusion: np.ndarray) -> dict:
    """Accuracy and support-weighted precision/recall/F1 from a confusion
    matrix (rows = true class). Empty rows or columns score zero."""
    confusion = np.asarray(confusion, dtype=np.float64)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise RatingError("confusion matrix must be square")
    total = confusion.sum()
    if total == 0:
        raise RatingError("empty confusion matrix")
    diag = np.diag(confusion)
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, diag / predicted, 0.0)
        recall = np.where(support > 0, diag / support, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)
    weights = support / total
    report = {
        "accuracy": float(diag.sum() / total),
        "recall": float(weights @ recall),
        "f1": float(weights @ f1),
        "precision_per_class": precision,
        "recall_per_class": recall,
        "f1_per_class": f1,
        "support": support,
    }
    assert abs(report["recall"] - report["accuracy"]) < 1e-12, (
        "weighted recall must equal accuracy for single-label data"
    )
    return report


def build_report(y_true, y_pred, n_classes: int = N_CLASSES, warnings=()) -> RatingReport:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    m = classification_metrics(confusion)
    per_class = pd.DataFrame(
        {
            "class": list(RATING_CLASSES[:n_classes]),
            "precision": m["precision_per_class"],
            "recall": m["recall_per_class"],
            "f1": m["f1_per_class"],
            "support": m["support"].astype(int),
        }
    )
    return RatingReport(
        accuracy=m["accuracy"],
        recall=m["recall"],
        f1=m["f1"],
        per_class=per_class,
        confusion=confusion,
        n_obs=len(y_true),
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# model fitting


def make_classifier(kind: str, params: dict | None = None, random_state: int = 0):
    params = dict(params or {})
    if kind == "rf":
        return RandomForestRatingClassifier(random_state=random_state, **params)
    if kind == "xgb":
        return SecondOrderBoostingClassifier(**params)
    raise RatingError(f"unknown classifier kind {kind!r}")


def _stratified_split(y, fractions, rng):
    """Index arrays per bucket, stratified by class where counts permit."""
    buckets = [[] for _ in fractions]
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        rng.shuffle(idx)
        n_c = len(idx)
        tail_sizes = []
        for f in fractions[1:]:
            want = int(round(f * n_c))
            avail = n_c - 1 - sum(tail_sizes)  # the first bucket keeps >= 1 row
            tail_sizes.append(max(0, min(want, avail)))
        pos = n_c - sum(tail_sizes)
        buckets[0].extend(idx[:pos])
        for b, size in enumerate(tail_sizes, start=1):
            buckets[b].extend(idx[pos : pos + size])
            pos += size
    return [np.sort(np.asarray(b, dtype=np.intp)) for b in buckets]


def fit_rating_model(
    data: LabeledRatingData,
    kind: str = "rf",
    grid: list[dict] | None = None,
    split_seed: int = 0,
    min_rows: int = 100,
):
    """Seeded stratified 8:1:1 split; the grid point with the best weighted
    F1 on validation (ties: first) is refit on train+validation and scored
    on the held-out test rows. Returns (classifier, RatingReport)."""
    grid = grid if grid is not None else DEFAULT_CLASSIFIER_GRIDS[kind]
    if not grid:
        raise RatingError("classifier grid is empty")
    if len(data) < min_rows:
        raise RatingError(f"need >= {min_rows} rows, got {len(data)}")
    rng = np.random.default_rng(split_seed)
    train_idx, val_idx, test_idx = _stratified_split(data.y, (0.8, 0.1, 0.1), rng)
    return _select_and_score(
        data, kind, grid, split_seed, train_idx, val_idx, test_idx
    )


def _select_and_score(data, kind, grid, seed, train_idx, val_idx, test_idx):
    warnings = []
    present = set(np.unique(data.y[train_idx]))
    absent = sorted(set(range(N_CLASSES)) - present)
    if absent:
        warnings.append(
            "classes never seen in training: "
            + ", ".join(RATING_CLASSES[c] for c in absent)
        )

    best_i, best_f1 = 0, -np.inf
    for i, params in enumerate(grid):
        model = make_classifier(kind, params, random_state=seed)
        model.fit(data.X[train_idx], data.y[train_idx], n_classes=N_CLASSES)
        val_report = build_report(data.y[val_idx], model.predict(data.X[val_idx]))
        if val_report.f1 > best_f1:
            best_i, best_f1 = i, val_report.f1

    refit_idx = np.sort(np.concatenate([train_idx, val_idx]))
    winner = make_classifier(kind, grid[best_i], random_state=seed)
    winner.fit(data.X[refit_idx], data.y[refit_idx], n_classes=N_CLASSES)
    report = build_report(
        data.y[test_idx], winner.predict(data.X[test_idx]), warnings=warnings
    )
    report.folds.append(
        {"chosen": grid[best_i], "val_f1": best_f1, "n_test": len(test_idx)}
    )
    return winner, report


def kfold_rating(
    data: LabeledRatingData,
    kind: str = "rf",
    grid: list[dict] | None = None,
    k: int = 5,
    seed: int = 0,
) -> RatingReport:
    """Seeded K-fold evaluation; folds differ in size by at most one.

    Each fold serves once as the test set while the remainder is split
    8:1 (train:validation, proportions preserved) for grid selection.
    Headline metrics are unweighted means over folds.
    """
    grid = grid if grid is not None else DEFAULT_CLASSIFIER_GRIDS[kind]
    if k < 2:
        raise RatingError("k must be >= 2")
    n = len(data)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = np.array_split(perm, k)

    fold_reports = []
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    all_warnings: list[str] = []
    for fold_no, test_idx in enumerate(folds):
        rest = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != fold_no]))
        sub_rng = np.random.default_rng((seed, fold_no))
        train_rel, val_rel = _stratified_split(
            data.y[rest], (8 / 9, 1 / 9), sub_rng
        )
        _, report = _select_and_score(
            data, kind, grid, seed,
            rest[train_rel], rest[val_rel], np.sort(test_idx),
        )
        confusion += report.confusion
        all_warnings.extend(report.warnings)
        fold_reports.append(
            {
                "fold": fold_no,
                "n_test": int(len(test_idx)),
                "accuracy": report.accuracy,
                "recall": report.recall,
                "f1": report.f1,
                "chosen": report.folds[0]["chosen"],
            }
        )

    frame = pd.DataFrame(fold_reports)
    pooled = classification_metrics(confusion)
    per_class = pd.DataFrame(
        {
            "class": list(RATING_CLASSES),
            "precision": pooled["precision_per_class"],
            "recall": pooled["recall_per_class"],
            "f1": pooled["f1_per_class"],
            "support": pooled["support"].astype(int),
        }
    )
    return RatingReport(
        accuracy=float(frame["accuracy"].mean()),
        recall=float(frame["recall"].mean()),
        f1=float(frame["f1"].mean()),
        per_class=per_class,
        confusion=confusion,
        n_obs=n,
        folds=fold_reports,
        warnings=tuple(dict.fromkeys(all_warnings)),
    )


def per_industry_models(
    data: LabeledRatingData,
    kind: str = "rf",
    grid: list[dict] | None = None,
    k: int = 5,
    seed: int = 0,
    min_rows: int = 100,
) -> dict[str, object]:
    """K-fold reports per industry tag; small partitions report a skip."""
    out: dict[str, object] = {}
    for tag in sorted(set(data.industry)):
        idx = np.flatnonzero(data.industry == tag)
        if len(idx) < min_rows:
            out[tag] = {"skipped": True, "reason": f"only {len(idx)} rows"}
            continue
        subset = LabeledRatingData(
            X=data.X[idx],
            y=data.y[idx],
            keys=[data.keys[i] for i in idx],
            industry=data.industry[idx],
            feature_names=data.feature_names,
            scale=data.scale,
        )
        out[tag] = kfold_rating(subset, kind=kind, grid=grid, k=k, seed=seed)
    return out
