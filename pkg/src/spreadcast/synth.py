"""Seeded synthetic bond panel with planted, documented ground truth.

Every pipeline claim is testable against this generator: the spread is a
known function of lagged features (linear, threshold, and interaction
terms) plus an AR(1) bond effect and Gaussian noise; the agency rating is
a coarse noisy monotone transform of the same expected spread (signal,
but less than the features carry); and the mechanism columns are coupled
to expected risk with planted signs (profitability falls with risk,
short-term debt share and financing constraints rise, leverage is
U-shaped). Randomness comes from counter-based Philox streams keyed by
(seed, purpose, bond), so panels are bit-reproducible and bonds are
independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .panel import FeatureEntry, FeatureManifest, Panel, month_index, sort_panel

TERM_FORMS = ("linear", "threshold", "interaction")

# stream labels for the per-purpose Philox keys
_STREAM_FEATURES = 1
_STREAM_EFFECT = 2
_STREAM_NOISE = 3
_STREAM_RATING = 4
_STREAM_MECHANISM = 5
_STREAM_DUMMY = 6


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class PlantedTerm:
    """One planted signal component of the spread function.

    linear:      coefficient * x
    threshold:   coefficient * 1[x > cut]
    interaction: coefficient * x * x_partner
    """

    feature: str
    form: str
    coefficient: float
    partner: str | None = None
    cut: float = 0.5

    def __post_init__(self):
        if self.form not in TERM_FORMS:
            raise SynthError(f"unknown term form {self.form!r}")
        if self.form == "interaction" and not self.partner:
            raise SynthError("interaction terms need a partner feature")

    @property
    def features(self) -> tuple[str, ...]:
        return (self.feature,) if self.partner is None else (self.feature, self.partner)


DEFAULT_SIGNAL_PLAN: tuple[PlantedTerm, ...] = (
    PlantedTerm("F1", "linear", 1.1),
    PlantedTerm("NF1", "linear", 0.9),
    PlantedTerm("NF2", "threshold", 0.8),
    PlantedTerm("NF3", "interaction", 0.6, partner="F2"),
    PlantedTerm("M1", "linear", 0.6),
    PlantedTerm("B1", "linear", 0.5),
)


@dataclass(frozen=True)
class MechanismCouplings:
    """Signed couplings from standardized expected risk to the mechanism
    columns; leverage is planted as a U (quadratic about the median)."""

    roa_base: float = 0.03
    roa_slope: float = -0.015
    roa_noise: float = 0.012
    leverage_base: float = 0.60
    leverage_curve: float = 0.015
    leverage_noise: float = 0.04
    stl_base: float = 0.69
    stl_slope: float = 0.03
    stl_noise: float = 0.05
    kz_base: float = 2.1
    kz_slope: float = 0.30
    kz_noise: float = 0.45


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 7
    n_bonds: int = 200
    n_months: int = 72
    n_macro: int = 8
    n_financial: int = 10
    n_nonfinancial: int = 6
    n_bond_features: int = 4
    n_dummy_bond_features: int = 1  # trailing B columns become 0/1 dummies
    signal_plan: tuple[PlantedTerm, ...] = DEFAULT_SIGNAL_PLAN
    noise_sd: float = 0.35
    rating_noise_sd: float = 2.0
    bond_effect_sd: float = 0.3
    bond_effect_rho: float = 0.8
    feature_rho: float = 0.9
    spread_base: float = 2.0
    mechanism: MechanismCouplings = field(default_factory=MechanismCouplings)
    n_industries: int = 4
    start_month: str = "2012-01"

    def manifest(self) -> FeatureManifest:
        entries = []
        for group, count in (
            ("M", self.n_macro),
            ("F", self.n_financial),
            ("NF", self.n_nonfinancial),
            ("B", self.n_bond_features),
        ):
            for i in range(1, count + 1):
                name = f"{group}{i}"
                entries.append(FeatureEntry(name=name, group=group, id=name))
        return FeatureManifest(entries=tuple(entries))

    def validate(self) -> None:
        if self.n_bonds < 10:
            raise SynthError("n_bonds must be >= 10")
        if self.n_months < 12:
            raise SynthError("n_months must be >= 12")
        if not 0 <= self.feature_rho < 1 or not 0 <= self.bond_effect_rho < 1:
            raise SynthError("AR coefficients must lie in [0, 1)")
        if self.noise_sd < 0 or self.rating_noise_sd < 0 or self.bond_effect_sd < 0:
            raise SynthError("noise scales must be non-negative")
        if self.n_dummy_bond_features > self.n_bond_features:
            raise SynthError("more dummy columns than bond-feature columns")
        names = set(self.manifest().names)
        dummies = self._dummy_names()
        planted_groups = set()
        has_interaction = False
        for term in self.signal_plan:
            for f in term.features:
                if f not in names:
                    raise SynthError(f"planted feature {f!r} not in the manifest")
                if f in dummies:
                    raise SynthError(f"planted feature {f!r} is a dummy column")
            planted_groups.add(_group_of(term.feature))
            has_interaction |= term.form == "interaction"
        if "NF" not in planted_groups:
            raise SynthError("signal plan must plant at least one NF-group term")
        if not has_interaction:
            raise SynthError("signal plan must include an interaction term")

    def _dummy_names(self) -> set[str]:
        return {
            f"B{i}"
            for i in range(
                self.n_bond_features - self.n_dummy_bond_features + 1,
                self.n_bond_features + 1,
            )
        }


def _group_of(name: str) -> str:
    return "NF" if name.startswith("NF") else name[0]


@dataclass(frozen=True)
class GroundTruth:
    """Planted terms plus the month-by-month true conditional mean,
    aligned with the generated panel rows (NaN where undefined)."""

    terms: tuple[PlantedTerm, ...]
    cond_mean: np.ndarray
    bond_ids: np.ndarray
    months: np.ndarray

    def to_dict(self) -> dict:
        return {
            "terms": [
                {
                    "feature": t.feature,
                    "form": t.form,
                    "coefficient": t.coefficient,
                    "partner": t.partner,
                    "cut": t.cut,
                }
                for t in self.terms
            ],
            "cond_mean": [
                None if not np.isfinite(v) else float(v) for v in self.cond_mean
            ],
            "keys": [
                [str(b), int(m)] for b, m in zip(self.bond_ids, self.months)
            ],
        }


def describe_truth(truth: GroundTruth) -> list[tuple[str, float]]:
    """Planted features ranked by |coefficient| (ties: by feature id).

    A feature referenced by several terms (for example as an interaction
    partner) scores its largest |coefficient|.
    """
    score: dict[str, float] = {}
    for term in truth.terms:
        for f in term.features:
            score[f] = max(score.get(f, 0.0), abs(term.coefficient))
    return sorted(score.items(), key=lambda kv: (-kv[1], kv[0]))


def _bond_rng(seed: int, stream: int, bond: int) -> np.random.Generator:
    """Philox keyed by (seed, stream << 32 | bond): one stream per purpose
    per bond, independent and reproducible across platforms."""
    key = (np.uint64(seed % 2**64), (np.uint64(stream) << np.uint64(32)) | np.uint64(bond))
    return np.random.Generator(np.random.Philox(key=key))


def _pooled_rng(seed: int, stream: int) -> np.random.Generator:
    return _bond_rng(seed, stream, 2**32 - 1)


def _ar1(rng, n: int, rho: float, sd: float) -> np.ndarray:
    """Stationary AR(1) path with marginal standard deviation sd."""
    innov = rng.normal(size=n)
    out = np.empty(n)
    out[0] = innov[0]
    scale = np.sqrt(1.0 - rho * rho)
    for t in range(1, n):
        out[t] = rho * out[t - 1] + scale * innov[t]
    return out * sd


def _evaluate_terms(terms, col_of, feats: np.ndarray) -> np.ndarray:
    out = np.zeros(feats.shape[0])
    for term in terms:
        x = feats[:, col_of[term.feature]]
        if term.form == "linear":
            out += term.coefficient * x
        elif term.form == "threshold":
            out += term.coefficient * (x > term.cut)
        else:
            out += term.coefficient * x * feats[:, col_of[term.partner]]
    return out


def generate(spec: SynthSpec) -> tuple[Panel, GroundTruth]:
    """Deterministically expand a spec into (panel, ground truth)."""
    spec.validate()
    manifest = spec.manifest()
    names = manifest.names
    col_of = {name: j for j, name in enumerate(names)}
    n_feat = len(names)
    T = spec.n_months
    start = month_index(spec.start_month)
    dummies = sorted(spec._dummy_names())

    all_feats = np.empty((spec.n_bonds * T, n_feat))
    quality = np.empty(spec.n_bonds * T)  # expected next-month spread, ex base
    spreads = np.full(spec.n_bonds * T, np.nan)
    cond_mean = np.full(spec.n_bonds * T, np.nan)
    bond_ids = np.empty(spec.n_bonds * T, dtype=object)
    months = np.empty(spec.n_bonds * T, dtype=np.int64)

    for b in range(spec.n_bonds):
        rng_f = _bond_rng(spec.seed, _STREAM_FEATURES, b)
        feats = np.column_stack(
            [_ar1(rng_f, T, spec.feature_rho, 1.0) for _ in range(n_feat)]
        )
        rng_d = _bond_rng(spec.seed, _STREAM_DUMMY, b)
        for name in dummies:
            feats[:, col_of[name]] = float(rng_d.integers(0, 2))

        rng_e = _bond_rng(spec.seed, _STREAM_EFFECT, b)
        effect = _ar1(rng_e, T, spec.bond_effect_rho, spec.bond_effect_sd)
        rng_n = _bond_rng(spec.seed, _STREAM_NOISE, b)
        noise = rng_n.normal(size=T) * spec.noise_sd

        signal = _evaluate_terms(spec.signal_plan, col_of, feats)
        # quality at tau: expected spread one month out, known at tau
        q = spec.spread_base + signal + effect
        mu = np.full(T, np.nan)
        mu[1:] = spec.spread_base + signal[:-1] + effect[1:]
        s = np.full(T, np.nan)
        s[1:] = mu[1:] + noise[1:]

        rows = slice(b * T, (b + 1) * T)
        all_feats[rows] = feats
        quality[rows] = q
        spreads[rows] = s
        cond_mean[rows] = mu
        bond_ids[rows] = f"B{b:04d}"
        months[rows] = start + np.arange(T)

    # agency rating: coarse 10-level monotone transform of quality + noise
    rng_r = _pooled_rng(spec.seed, _STREAM_RATING)
    noisy_quality = quality + rng_r.normal(size=len(quality)) * spec.rating_noise_sd
    cuts = np.quantile(noisy_quality, np.arange(1, 10) / 10.0, method="linear")
    rating = (np.searchsorted(cuts, noisy_quality, side="left") + 1).astype(np.float64)

    # mechanism columns coupled to standardized quality
    z = (quality - quality.mean()) / quality.std(ddof=1)
    z_med = float(np.median(z))
    rng_m = _pooled_rng(spec.seed, _STREAM_MECHANISM)
    mech_noise = rng_m.normal(size=(len(z), 4))
    cpl = spec.mechanism
    mechanism = {
        "roa": cpl.roa_base + cpl.roa_slope * z + cpl.roa_noise * mech_noise[:, 0],
        "leverage": cpl.leverage_base
        + cpl.leverage_curve * (z - z_med) ** 2
        + cpl.leverage_noise * mech_noise[:, 1],
        "stl_ratio": cpl.stl_base + cpl.stl_slope * z + cpl.stl_noise * mech_noise[:, 2],
        "kz": cpl.kz_base + cpl.kz_slope * z + cpl.kz_noise * mech_noise[:, 3],
    }

    industries = np.array(
        [f"IND{(int(b[1:]) % spec.n_industries) + 1}" for b in bond_ids], dtype=object
    )

    panel = sort_panel(
        Panel(
            bond_ids=bond_ids,
            months=months,
            spread=spreads,
            rating_code=rating,
            industry=industries,
            mechanism=mechanism,
            features=all_feats,
            manifest=manifest,
        )
    )
    truth_order = np.lexsort((months, bond_ids))
    truth = GroundTruth(
        terms=tuple(spec.signal_plan),
        cond_mean=cond_mean[truth_order],
        bond_ids=bond_ids[truth_order],
        months=months[truth_order],
    )
    return panel, truth


def oracle_predictions(panel: Panel, truth: GroundTruth):
    """Per-row true conditional mean aligned with the panel rows."""
    lookup = {
        (b, int(m)): v
        for b, m, v in zip(truth.bond_ids, truth.months, truth.cond_mean)
    }
    return np.array(
        [
            lookup.get((b, int(m)), np.nan)
            for b, m in zip(panel.bond_ids, panel.months)
        ]
    )
