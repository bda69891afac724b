"""Bond-month panel: data model, preprocessing, and supervised-slice assembly.

A panel holds one row per (bond, month) with the realized credit spread, an
optional agency rating code, mechanism columns, and a feature matrix whose
columns are described by a :class:`FeatureManifest`. Missing values are NaN
throughout. The supervised dataset pairs the features a bond showed at month
``t-1`` with the spread it realized at month ``t``.
"""

from __future__ import annotations

import re
import warnings as _warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

GROUPS = ("M", "F", "NF", "B")
MECHANISM_COLUMNS = ("roa", "leverage", "stl_ratio", "kz")

_GROUP_PREFIX = re.compile(r"^(NF|M|F|B)\d")


class PanelError(ValueError):
    """Malformed panel input (duplicate keys, unknown groups, bad ranges)."""


class EmptySliceError(PanelError):
    """A supervised slice came out empty for the requested month range."""


def month_index(label: str) -> int:
    """Convert a ``YYYY-MM`` label to integer months since year 0."""
    try:
        year, month = label.strip().split("-")
        y, m = int(year), int(month)
    except (ValueError, AttributeError):
        raise PanelError(f"bad month label {label!r}, expected YYYY-MM") from None
    if not 1 <= m <= 12:
        raise PanelError(f"bad month label {label!r}, expected YYYY-MM")
    return y * 12 + (m - 1)


def month_label(index: int) -> str:
    """Inverse of :func:`month_index`."""
    return f"{index // 12:04d}-{index % 12 + 1:02d}"


@dataclass(frozen=True)
class FeatureEntry:
    name: str
    group: str
    id: str


@dataclass(frozen=True)
class FeatureManifest:
    """Ordered feature-column descriptions with group tags M/F/NF/B.

    The "traditional" feature set is every M, F, and B column; "all" adds
    the NF block.
    """

    entries: tuple[FeatureEntry, ...]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise PanelError("duplicate feature names in manifest")
        for e in self.entries:
            if e.group not in GROUPS:
                raise PanelError(f"unknown feature group {e.group!r} for {e.name!r}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    @property
    def groups(self) -> list[str]:
        return [e.group for e in self.entries]

    def indices(self, feature_set: str) -> np.ndarray:
        """Column indices for a named feature set ("traditional" or "all")."""
        if feature_set == "all":
            return np.arange(len(self.entries))
        if feature_set == "traditional":
            return np.array(
                [i for i, e in enumerate(self.entries) if e.group != "NF"],
                dtype=np.intp,
            )
        raise PanelError(f"unknown feature set {feature_set!r}")

    @classmethod
    def from_names(cls, names, overrides: dict[str, str] | None = None):
        """Infer groups from M/F/NF/B name prefixes, with optional overrides."""
        overrides = overrides or {}
        entries = []
        for name in names:
            if name in overrides:
                group = overrides[name]
            else:
                m = _GROUP_PREFIX.match(name)
                if m is None:
                    raise PanelError(
                        f"cannot infer feature group from column {name!r}; "
                        "expected an M/F/NF/B prefix or an explicit override"
                    )
                group = m.group(1)
            entries.append(FeatureEntry(name=name, group=group, id=name))
        return cls(entries=tuple(entries))


@dataclass(frozen=True)
class Panel:
    """Columnar bond-month observation table.

    Rows are sorted by (bond_id, month) and (bond_id, month) pairs are
    unique. ``months`` is the contiguous month axis spanned by the data.
    """

    bond_ids: np.ndarray  # object array of str
    months: np.ndarray  # int64 month indices, one per row
    spread: np.ndarray  # float64, NaN = missing
    rating_code: np.ndarray  # float64, NaN = missing
    industry: np.ndarray  # object array of str ("" = missing)
    mechanism: dict[str, np.ndarray]  # roa / leverage / stl_ratio / kz
    features: np.ndarray  # float64 (n_rows, n_features), NaN = missing
    manifest: FeatureManifest
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        n = len(self.bond_ids)
        for arr_name in ("months", "spread", "rating_code", "industry"):
            if len(getattr(self, arr_name)) != n:
                raise PanelError(f"column {arr_name} has wrong length")
        if self.features.shape != (n, len(self.manifest)):
            raise PanelError(
                f"feature matrix shape {self.features.shape} does not match "
                f"{n} rows x {len(self.manifest)} manifest entries"
            )
        for col in MECHANISM_COLUMNS:
            if len(self.mechanism[col]) != n:
                raise PanelError(f"mechanism column {col} has wrong length")
        keys = list(zip(self.bond_ids, self.months))
        if len(set(keys)) != len(keys):
            dupe = _first_duplicate(keys)
            raise PanelError(
                f"duplicate (bond_id, month) key: ({dupe[0]!r}, {month_label(dupe[1])})"
            )

    @property
    def n_rows(self) -> int:
        return len(self.bond_ids)

    def __len__(self) -> int:
        return self.n_rows

    @property
    def month_axis(self) -> np.ndarray:
        """Contiguous integer month axis from the earliest to latest row."""
        if self.n_rows == 0:
            return np.array([], dtype=np.int64)
        return np.arange(self.months.min(), self.months.max() + 1, dtype=np.int64)

    def row_lookup(self) -> dict[tuple[str, int], int]:
        return {
            (b, int(m)): i
            for i, (b, m) in enumerate(zip(self.bond_ids, self.months))
        }

    def to_frame(self) -> pd.DataFrame:
        """Flatten to the CSV schema (months back as YYYY-MM labels)."""
        data = {
            "bond_id": self.bond_ids,
            "month": [month_label(m) for m in self.months],
            "spread": self.spread,
            "rating_code": self.rating_code,
            "industry": self.industry,
        }
        for col in MECHANISM_COLUMNS:
            data[col] = self.mechanism[col]
        frame = pd.DataFrame(data)
        feat = pd.DataFrame(self.features, columns=self.manifest.names)
        return pd.concat([frame, feat], axis=1)


def _first_duplicate(keys):
    seen = set()
    for k in keys:
        if k in seen:
            return k
        seen.add(k)
    return keys[0]


@dataclass(frozen=True)
class SupervisedSlice:
    """Dense supervised dataset: features at t-1 paired with spread at t."""

    X: np.ndarray
    y: np.ndarray
    keys: list[tuple[str, int]]  # (bond_id, target month)
    bench_col: np.ndarray  # benchmark predictor at t-1 (NaN = missing)
    feature_names: list[str]
    feature_indices: np.ndarray  # columns of the panel feature matrix used

    def __len__(self) -> int:
        return len(self.y)


# ---------------------------------------------------------------------------
# loading


@dataclass(frozen=True)
class PanelSchema:
    """Column-name configuration for :func:`load_panel`."""

    bond_id: str = "bond_id"
    month: str = "month"
    spread: str = "spread"
    rating_code: str = "rating_code"
    industry: str = "industry"
    roa: str = "roa"
    leverage: str = "leverage"
    stl_ratio: str = "stl_ratio"
    kz: str = "kz"
    group_overrides: dict[str, str] = field(default_factory=dict)

    @property
    def reserved(self) -> list[str]:
        return [
            self.bond_id,
            self.month,
            self.spread,
            self.rating_code,
            self.industry,
            self.roa,
            self.leverage,
            self.stl_ratio,
            self.kz,
        ]


def load_panel(path, schema: PanelSchema | None = None) -> Panel:
    """Read a panel CSV; every non-reserved column becomes a feature.

    Unparseable numeric cells become missing; duplicate (bond, month) keys
    and feature columns with unrecognizable group prefixes are rejected.
    """
    schema = schema or PanelSchema()
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    for required in (schema.bond_id, schema.month, schema.spread):
        if required not in raw.columns:
            raise PanelError(f"panel file lacks required column {required!r}")

    feature_cols = [c for c in raw.columns if c not in schema.reserved]
    manifest = FeatureManifest.from_names(feature_cols, schema.group_overrides)

    def numeric(col: str, n: int) -> np.ndarray:
        if col not in raw.columns:
            return np.full(n, np.nan)
        return pd.to_numeric(raw[col], errors="coerce").to_numpy(dtype=np.float64)

    n = len(raw)
    months = np.array([month_index(v) for v in raw[schema.month]], dtype=np.int64)
    industry = (
        raw[schema.industry].to_numpy(dtype=object)
        if schema.industry in raw.columns
        else np.full(n, "", dtype=object)
    )
    panel = Panel(
        bond_ids=raw[schema.bond_id].to_numpy(dtype=object),
        months=months,
        spread=numeric(schema.spread, n),
        rating_code=numeric(schema.rating_code, n),
        industry=industry,
        mechanism={
            "roa": numeric(schema.roa, n),
            "leverage": numeric(schema.leverage, n),
            "stl_ratio": numeric(schema.stl_ratio, n),
            "kz": numeric(schema.kz, n),
        },
        features=np.column_stack(
            [numeric(c, n) for c in feature_cols]
        ).astype(np.float64)
        if feature_cols
        else np.empty((n, 0)),
        manifest=manifest,
    )
    return sort_panel(panel)


def sort_panel(panel: Panel) -> Panel:
    """Stable sort rows by (bond_id, month)."""
    order = np.lexsort((panel.months, panel.bond_ids))
    return replace(
        panel,
        bond_ids=panel.bond_ids[order],
        months=panel.months[order],
        spread=panel.spread[order],
        rating_code=panel.rating_code[order],
        industry=panel.industry[order],
        mechanism={k: v[order] for k, v in panel.mechanism.items()},
        features=panel.features[order],
    )


def save_panel(panel: Panel, path) -> None:
    panel.to_frame().to_csv(path, index=False)


# ---------------------------------------------------------------------------
# spread construction


def compute_spreads(bond_yields: pd.DataFrame, curve: pd.DataFrame) -> pd.DataFrame:
    """Credit spread = bond YTM minus the maturity-matched treasury YTM.

    ``bond_yields`` columns: bond_id, month, ytm, remaining_maturity.
    ``curve`` columns: month, maturity_months, ytm. The treasury yield is
    linearly interpolated in maturity at the bond's remaining maturity and
    clamped to the curve endpoints outside its range.
    """
    by_month: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for m, grp in curve.groupby("month"):
        key = m if isinstance(m, (int, np.integer)) else month_index(str(m))
        mats = grp["maturity_months"].to_numpy(dtype=np.float64)
        ytms = grp["ytm"].to_numpy(dtype=np.float64)
        order = np.argsort(mats)
        if len(mats) < 2:
            raise PanelError(
                f"treasury curve needs at least two maturities per month, "
                f"got {len(mats)} for {month_label(int(key))}"
            )
        by_month[int(key)] = (mats[order], ytms[order])

    months = [
        m if isinstance(m, (int, np.integer)) else month_index(str(m))
        for m in bond_yields["month"]
    ]
    missing = sorted({int(m) for m in months if int(m) not in by_month})
    if missing:
        raise PanelError(
            "months absent from treasury curve: "
            + ", ".join(month_label(m) for m in missing)
        )

    spreads = np.empty(len(bond_yields))
    ytm = bond_yields["ytm"].to_numpy(dtype=np.float64)
    rem = bond_yields["remaining_maturity"].to_numpy(dtype=np.float64)
    for i, m in enumerate(months):
        mats, ytms = by_month[int(m)]
        spreads[i] = ytm[i] - np.interp(rem[i], mats, ytms)
    return pd.DataFrame(
        {
            "bond_id": bond_yields["bond_id"].to_numpy(),
            "month": list(months),
            "spread": spreads,
        }
    )


# ---------------------------------------------------------------------------
# preprocessing


def quantile(values: np.ndarray, p: float) -> float:
    """Linear-interpolation (type-7) quantile of the finite values."""
    return float(np.quantile(values, p, method="linear"))


def preprocess(panel: Panel, winsor_p: float = 0.01, standardize: bool = True) -> Panel:
    """Monthly-median fill, full-sample winsorize, then z-score each feature.

    Binary/dummy columns (at most two distinct observed values) are filled
    but neither winsorized nor standardized. Spread, rating_code, and the
    mechanism columns are never transformed. Zero-variance continuous
    columns are centered with unit scale and recorded as warnings.
    """
    if not 0 <= winsor_p < 0.25:
        raise PanelError(f"winsor_p must be in [0, 0.25), got {winsor_p}")
    feats = panel.features.copy()
    warnings: list[str] = []
    n_cols = feats.shape[1]

    is_dummy = np.zeros(n_cols, dtype=bool)
    for j in range(n_cols):
        observed = feats[np.isfinite(feats[:, j]), j]
        is_dummy[j] = len(np.unique(observed)) <= 2

    # monthly-median fill, all feature columns
    for m in np.unique(panel.months):
        rows = panel.months == m
        block = feats[rows]
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN months
            col_medians = np.nanmedian(
                np.where(np.isfinite(block), block, np.nan), axis=0
            )
        miss = ~np.isfinite(block)
        fill = np.broadcast_to(col_medians, block.shape)
        block[miss & np.isfinite(fill)] = fill[miss & np.isfinite(fill)]
        feats[rows] = block

    for j in range(n_cols):
        if is_dummy[j]:
            continue
        col = feats[:, j]
        observed = np.isfinite(col)
        if not observed.any():
            warnings.append(f"feature {panel.manifest.names[j]!r} is entirely missing")
            continue
        vals = col[observed]
        if winsor_p > 0:
            lo = quantile(vals, winsor_p)
            hi = quantile(vals, 1.0 - winsor_p)
            vals = np.clip(vals, lo, hi)
        if standardize:
            mean = vals.mean()
            sd = vals.std(ddof=1) if len(vals) > 1 else 0.0
            if sd == 0.0 or not np.isfinite(sd):
                warnings.append(
                    f"feature {panel.manifest.names[j]!r} has zero variance; "
                    "centered with unit scale"
                )
                vals = vals - mean
            else:
                vals = (vals - mean) / sd
        col[observed] = vals
        feats[:, j] = col

    return replace(panel, features=feats, warnings=tuple(warnings))


# ---------------------------------------------------------------------------
# supervised assembly and date filtering


def _resolve_column(panel: Panel, name: str) -> np.ndarray:
    """A named per-row column: rating_code, a mechanism column, or a feature."""
    if name == "rating_code":
        return panel.rating_code
    if name in MECHANISM_COLUMNS:
        return panel.mechanism[name]
    if name in panel.manifest.names:
        return panel.features[:, panel.manifest.names.index(name)]
    raise PanelError(f"unknown benchmark predictor column {name!r}")


def build_slice(
    panel: Panel,
    feature_set: str = "all",
    target_months=None,
    bench_col: str = "rating_code",
) -> SupervisedSlice:
    """Pair each bond's features at t-1 with its spread at t.

    Rows with a missing spread at t or no observation at t-1 are dropped.
    ``target_months`` is an iterable of month indices (default: all months
    on the panel axis). The benchmark column carries ``bench_col`` (the
    agency rating code unless overridden) at t-1.
    """
    cols = panel.manifest.indices(feature_set)
    bench_values = _resolve_column(panel, bench_col)
    if target_months is None:
        targets = set(int(m) for m in panel.month_axis)
    else:
        targets = set(int(m) for m in target_months)
    lookup = panel.row_lookup()

    picked: list[tuple[str, int, int, int]] = []  # bond, month, row_t, row_prev
    for i in range(panel.n_rows):
        t = int(panel.months[i])
        if t not in targets or not np.isfinite(panel.spread[i]):
            continue
        prev = lookup.get((panel.bond_ids[i], t - 1))
        if prev is None:
            continue
        picked.append((panel.bond_ids[i], t, i, prev))

    if not picked:
        lo = min(targets) if targets else None
        hi = max(targets) if targets else None
        raise EmptySliceError(
            "no supervised rows for target months "
            f"[{month_label(lo) if lo is not None else '-'}, "
            f"{month_label(hi) if hi is not None else '-'}]"
        )

    picked.sort(key=lambda rec: (rec[0], rec[1]))
    rows_t = np.array([rec[2] for rec in picked], dtype=np.intp)
    rows_prev = np.array([rec[3] for rec in picked], dtype=np.intp)
    return SupervisedSlice(
        X=panel.features[np.ix_(rows_prev, cols)],
        y=panel.spread[rows_t],
        keys=[(rec[0], rec[1]) for rec in picked],
        bench_col=bench_values[rows_prev],
        feature_names=[panel.manifest.names[c] for c in cols],
        feature_indices=cols,
    )


def filter_dates(panel: Panel, from_month: int, to_month: int) -> Panel:
    """Inclusive month-range restriction; the manifest is unchanged."""
    if from_month > to_month:
        raise PanelError(
            f"from {month_label(from_month)} is after to {month_label(to_month)}"
        )
    keep = (panel.months >= from_month) & (panel.months <= to_month)
    return replace(
        panel,
        bond_ids=panel.bond_ids[keep],
        months=panel.months[keep],
        spread=panel.spread[keep],
        rating_code=panel.rating_code[keep],
        industry=panel.industry[keep],
        mechanism={k: v[keep] for k, v in panel.mechanism.items()},
        features=panel.features[keep],
    )
