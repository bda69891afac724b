"""Command-line pipeline: gen, preprocess, forecast, compare, importance,
mechanism, rate, and report.

Every run validates its configuration up front (reporting all violations
at once), echoes the resolved configuration, and writes a manifest with
input hashes, the seed, and package versions so any artifact can be
replayed byte-for-byte. ``--config`` points at a JSON file whose entries
override the corresponding flags.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import __version__
from .evalstats import dm_matrix, evaluate
from .explain import aggregate_importance, shap_values
from .harness import (
    DEFAULT_GRIDS,
    PredictionSet,
    WindowPlan,
    run_benchmark,
    run_walk_forward,
)
from .mechanism import mechanism_table
from .panel import load_panel, month_index, preprocess, save_panel
from .rating import (
    DEFAULT_CLASSIFIER_GRIDS,
    fit_rating_model,
    kfold_rating,
    per_industry_models,
    spreads_to_ratings,
)
from .synth import SynthSpec, generate
from .learners import REGRESSOR_KINDS

logger = logging.getLogger("spreadcast")


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _setup_logging():
    level = os.environ.get("SPREADCAST_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def _merge_config(options: dict, config_path) -> dict:
    """Apply JSON config overrides on top of the flag values."""
    merged = dict(options)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(merged)
        if unknown:
            raise ConfigError(
                [f"unknown config key {k!r}" for k in sorted(unknown)]
            )
        merged.update(overrides)
    return merged


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_run_artifacts(out_dir: Path, command: str, config: dict, inputs) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "resolved_config": {k: str(v) if isinstance(v, Path) else v
                            for k, v in config.items()},
        "input_hashes": {str(p): _sha256(p) for p in inputs},
        "versions": {
            "spreadcast": __version__,
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "python": sys.version.split()[0],
        },
    }
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def _fail(out_dir: Path | None, exc: Exception) -> None:
    report = {
        "error": str(exc),
        "type": type(exc).__name__,
        "violations": getattr(exc, "violations", [str(exc)]),
    }
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "error_report.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
    click.echo(json.dumps(report), err=True)
    sys.exit(2)


def _validated_plan(cfg: dict) -> WindowPlan:
    violations = []
    if cfg["window_mode"] not in ("rolling", "recursive"):
        violations.append(f"window mode {cfg['window_mode']!r} not rolling|recursive")
    if cfg["train_window"] < 2:
        violations.append("training window must be >= 2 months")
    if cfg["val_window"] is not None and not 1 <= cfg["val_window"] < cfg["train_window"]:
        violations.append("validation window must satisfy 1 <= val < window")
    if cfg.get("model") is not None and cfg["model"] not in REGRESSOR_KINDS:
        violations.append(f"model {cfg['model']!r} not one of {REGRESSOR_KINDS}")
    if cfg["features"] not in ("traditional", "all"):
        violations.append(f"feature set {cfg['features']!r} not traditional|all")
    if violations:
        raise ConfigError(violations)
    panel = cfg["_panel"]
    axis = panel.month_axis
    start = month_index(cfg["from_month"]) if cfg["from_month"] else int(axis[0])
    end = month_index(cfg["to_month"]) if cfg["to_month"] else int(axis[-1])
    return WindowPlan(
        mode=cfg["window_mode"],
        window=cfg["train_window"],
        val=cfg["val_window"],
        start_month=start,
        end_month=end,
    )


def _load_grid(grid_json):
    if grid_json is None:
        return None
    loaded = json.loads(Path(grid_json).read_text()) if Path(grid_json).exists() \
        else json.loads(grid_json)
    if not isinstance(loaded, list):
        raise ConfigError(["grid override must be a JSON list of parameter objects"])
    return loaded


@click.group()
@click.version_option(__version__)
def main():
    """Credit-spread forecasting, attribution, and implied ratings."""
    _setup_logging()


# ---------------------------------------------------------------------------
# gen


@main.command()
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--bonds", default=200, show_default=True, type=int)
@click.option("--months", default=72, show_default=True, type=int)
@click.option("--out-dir", default="out", show_default=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def gen(seed, bonds, months, out_dir, config_path):
    """Generate a seeded synthetic panel plus its ground-truth sidecar."""
    out = Path(out_dir)
    try:
        cfg = _merge_config(
            {"seed": seed, "bonds": bonds, "months": months, "out_dir": out_dir},
            config_path,
        )
        spec = SynthSpec(seed=cfg["seed"], n_bonds=cfg["bonds"], n_months=cfg["months"])
        panel, truth = generate(spec)
        out.mkdir(parents=True, exist_ok=True)
        save_panel(panel, out / "panel.csv")
        with open(out / "truth.json", "w", encoding="utf-8") as fh:
            json.dump(truth.to_dict(), fh)
        _write_run_artifacts(out, "gen", cfg, [])
        logger.info("wrote %s rows to %s", len(panel), out / "panel.csv")
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable
        _fail(out, exc)


# ---------------------------------------------------------------------------
# preprocess


@main.command("preprocess")
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--winsor", default=0.01, show_default=True, type=float)
@click.option("--out-dir", default="out", show_default=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def preprocess_cmd(panel_path, winsor, out_dir, config_path):
    """Median-fill, winsorize, and z-score a panel CSV."""
    out = Path(out_dir)
    try:
        cfg = _merge_config(
            {"panel": panel_path, "winsor": winsor, "out_dir": out_dir}, config_path
        )
        panel = preprocess(load_panel(cfg["panel"]), winsor_p=cfg["winsor"])
        out.mkdir(parents=True, exist_ok=True)
        save_panel(panel, out / "panel_preprocessed.csv")
        with open(out / "preprocess_warnings.json", "w", encoding="utf-8") as fh:
            json.dump(list(panel.warnings), fh, indent=2)
        _write_run_artifacts(out, "preprocess", cfg, [cfg["panel"]])
    except Exception as exc:  # noqa: BLE001
        _fail(out, exc)


# ---------------------------------------------------------------------------
# forecast

_window_options = [
    click.option("--window", "window_mode", default="rolling", show_default=True),
    click.option("--train-window", "-M", default=6, show_default=True, type=int),
    click.option("--val-window", default=None, type=int,
                 help="validation months (default max(1, window//3))"),
    click.option("--from-month", default=None, help="YYYY-MM start (panel start)"),
    click.option("--to-month", default=None, help="YYYY-MM end (panel end)"),
]


def _with_options(opts):
    def deco(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return deco


@main.command()
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--model", default="rf", show_default=True)
@_with_options(_window_options)
@click.option("--features", default="all", show_default=True)
@click.option("--grid", "grid_json", default=None,
              help="JSON list (inline or file path) overriding the default grid")
@click.option("--bench-col", default="rating_code", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--threads", default=0, show_default="available cores", type=int)
@click.option("--preprocessed/--raw", default=False,
              help="skip preprocessing if the panel is already standardized")
@click.option("--out-dir", default="out", show_default=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def forecast(panel_path, model, window_mode, train_window, val_window, from_month,
             to_month, features, grid_json, bench_col, seed, threads, preprocessed,
             out_dir, config_path):
    """Walk-forward forecast for one learner; writes predictions and metrics."""
    out = Path(out_dir)
    try:
        cfg = _merge_config(
            {
                "panel": panel_path, "model": model, "window_mode": window_mode,
                "train_window": train_window, "val_window": val_window,
                "from_month": from_month, "to_month": to_month,
                "features": features, "grid": grid_json, "bench_col": bench_col,
                "seed": seed, "threads": threads, "preprocessed": preprocessed,
                "out_dir": out_dir,
            },
            config_path,
        )
        panel = load_panel(cfg["panel"])
        if not cfg["preprocessed"]:
            panel = preprocess(panel)
        cfg["_panel"] = panel
        plan = _validated_plan(cfg)
        del cfg["_panel"]
        threads = cfg["threads"] or os.cpu_count() or 1
        pred = run_walk_forward(
            panel, plan, cfg["model"], grid=_load_grid(cfg["grid"]),
            feature_set=cfg["features"], bench_col=cfg["bench_col"],
            seed=cfg["seed"], threads=threads,
        )
        out.mkdir(parents=True, exist_ok=True)
        pred.save(out / "predictions.csv", out / "predictions_meta.json")
        report = evaluate(pred)
        with open(out / "eval.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        _write_run_artifacts(out, "forecast", cfg, [cfg["panel"]])
        logger.info("R2_OS %.4f over %d rows", report.r2_os, report.n_obs)
    except Exception as exc:  # noqa: BLE001
        _fail(out, exc)


# ---------------------------------------------------------------------------
# compare


@main.command()
@click.argument("prediction_csvs", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--nw-lag", default=None, type=int)
@click.option("--k-comparisons", default=None, type=int,
              help="Bonferroni divisor (default: number of pairs)")
@click.option("--out-dir", default="out", show_default=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def compare(prediction_csvs, nw_lag, k_comparisons, out_dir, config_path):
    """Pairwise modified Diebold-Mariano matrix over prediction CSVs."""
    out = Path(out_dir)
    try:
        cfg = _merge_config(
            {
                "predictions": list(prediction_csvs), "nw_lag": nw_lag,
                "k_comparisons": k_comparisons, "out_dir": out_dir,
            },
            config_path,
        )
        if len(cfg["predictions"]) < 2:
            raise ConfigError(["compare needs at least two prediction CSVs"])
        preds = {}
        for path in cfg["predictions"]:
            name = Path(path).stem
            preds[name] = PredictionSet.load(path)
        stats, flags = dm_matrix(
            preds, nw_lag=cfg["nw_lag"], k_comparisons=cfg["k_comparisons"]
        )
        out.mkdir(parents=True, exist_ok=True)
        stats.to_csv(out / "dm_statistics.csv")
        flags.to_csv(out / "dm_flags.csv")
        with open(out / "dm.json", "w", encoding="utf-8") as fh:
            json.dump(
                {"statistics": stats.to_dict(), "flags": flags.to_dict()},
                fh, indent=2,
            )
        _write_run_artifacts(out, "compare", cfg, cfg["predictions"])
    except Exception as exc:  # noqa: BLE001
        _fail(out, exc)


# ---------------------------------------------------------------------------
# importance


@main.command()
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--model", default="rf", show_default=True)
@_with_options(_window_options)
@click.option("--features", default="all", show_default=True)
@click.option("--grid", "grid_json", default=None)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--threads", default=0, type=int)
@click.option("--out-dir", default="out", show_default=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def importance(panel_path, model, window_mode, train_window, val_window, from_month,
               to_month, features, grid_json, seed, threads, out_dir, config_path):
    """Monthly attribution on validation rows, aggregated and ranked."""
    out = Path(out_dir)
    try:
        cfg = _merge_config(
            {
                "panel": panel_path, "model": model, "window_mode": window_mode,
                "train_window": train_window, "val_window": val_window,
                "from_month": from_month, "to_month": to_month,
                "features": features, "grid": grid_json, "seed": seed,
                "threads": threads, "out_dir": out_dir,
            },
            config_path,
        )
        panel = preprocess(load_panel(cfg["panel"]))
        cfg["_panel"] = panel
        plan = _validated_plan(cfg)
        del cfg["_panel"]
        threads = cfg["threads"] or os.cpu_count() or 1
        pred = run_walk_forward(
            panel, plan, cfg["model"], grid=_load_grid(cfg["grid"]),
            feature_set=cfg["features"], seed=cfg["seed"], threads=threads,
            collect_shap=True,
        )
        cols = panel.manifest.indices(cfg["features"])
        names = [panel.manifest.names[c] for c in cols]
        groups = [panel.manifest.groups[c] for c in cols]
        report = aggregate_importance(pred.shap_monthly, names, groups)
        out.mkdir(parents=True, exist_ok=True)
        report.to_frame().to_csv(out / "importance.csv", index=False)
        detail = {
            "monthly_mean": report.monthly_mean.to_dict(orient="index"),
            "monthly_mean_abs": report.monthly_mean_abs.to_dict(orient="index"),
        }
        with open(out / "importance_monthly.json", "w", encoding="utf-8") as fh:
            json.dump(detail, fh)
        _write_run_artifacts(out, "importance", cfg, [cfg["panel"]])
    except Exception as exc:  # noqa: BLE001
        _fail(out, exc)


# ---------------------------------------------------------------------------
# mechanism


@main.command("mechanism")
@click.option("--predictions", "pred_path", required=True,
              type=click.Path(exists=True))
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--nw-lag", default=None, type=int)
@click.option("--out-dir", default="out", show_default=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def mechanism_cmd(pred_path, panel_path, nw_lag, out_dir, config_path):
    """Quintile mechanism table (ROA, leverage, debt structure, KZ)."""
    out = Path(out_dir)
    try:
        cfg = _merge_config(
            {
                "predictions": pred_path, "panel": panel_path,
                "nw_lag": nw_lag, "out_dir": out_dir,
            },
            config_path,
        )
        pred = PredictionSet.load(cfg["predictions"])
        panel = load_panel(cfg["panel"])
        table = mechanism_table(pred, panel, nw_lag=cfg["nw_lag"])
        out.mkdir(parents=True, exist_ok=True)
        table.to_frame().to_csv(out / "mechanism.csv")
        _write_run_artifacts(
            out, "mechanism", cfg, [cfg["predictions"], cfg["panel"]]
        )
    except Exception as exc:  # noqa: BLE001
        _fail(out, exc)


# ---------------------------------------------------------------------------
# rate


@main.command()
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--model", default="rf", show_default=True,
              type=click.Choice(["rf", "xgb"]))
@click.option("--k", default=5, show_default=True, type=int)
@click.option("--features", default="all", show_default=True)
@click.option("--per-industry", is_flag=True, default=False)
@click.option("--importance", "with_importance", is_flag=True, default=False)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--grid", "grid_json", default=None)
@click.option("--out-dir", default="out", show_default=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def rate(panel_path, model, k, features, per_industry, with_importance, seed,
         grid_json, out_dir, config_path):
    """Spread-implied 10-class rating model with K-fold evaluation."""
    out = Path(out_dir)
    try:
        cfg = _merge_config(
            {
                "panel": panel_path, "model": model, "k": k,
                "features": features, "per_industry": per_industry,
                "importance": with_importance, "seed": seed, "grid": grid_json,
                "out_dir": out_dir,
            },
            config_path,
        )
        panel = preprocess(load_panel(cfg["panel"]))
        data = spreads_to_ratings(panel, feature_set=cfg["features"])
        grid = _load_grid(cfg["grid"])
        report = kfold_rating(data, kind=cfg["model"], grid=grid, k=cfg["k"],
                              seed=cfg["seed"])
        rows = [{"scope": "all", "accuracy": report.accuracy,
                 "recall": report.recall, "f1": report.f1, "n": report.n_obs}]
        detail = {"all": _rating_detail(report)}
        if cfg["per_industry"]:
            by_ind = per_industry_models(data, kind=cfg["model"], grid=grid,
                                         k=cfg["k"], seed=cfg["seed"])
            for tag, rep in sorted(by_ind.items()):
                if isinstance(rep, dict):
                    detail[tag] = rep
                    continue
                rows.append({"scope": tag, "accuracy": rep.accuracy,
                             "recall": rep.recall, "f1": rep.f1, "n": rep.n_obs})
                detail[tag] = _rating_detail(rep)
        out.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows).to_csv(out / "rating.csv", index=False)
        with open(out / "rating_detail.json", "w", encoding="utf-8") as fh:
            json.dump(detail, fh, indent=2)
        if cfg["importance"]:
            _rating_importance(data, cfg, out)
        _write_run_artifacts(out, "rate", cfg, [cfg["panel"]])
    except Exception as exc:  # noqa: BLE001
        _fail(out, exc)


def _rating_detail(report) -> dict:
    return {
        "accuracy": report.accuracy,
        "recall": report.recall,
        "f1": report.f1,
        "per_class": report.per_class.to_dict(orient="records"),
        "folds": report.folds,
        "warnings": list(report.warnings),
    }


def _rating_importance(data, cfg, out: Path) -> None:
    """Attribution of the rating classifier on its held-out rows, monthly."""
    model, _ = fit_rating_model(
        data, kind=cfg["model"], grid=_load_grid(cfg["grid"]),
        split_seed=cfg["seed"],
    )
    months = np.array([m for _, m in data.keys])
    monthly = {}
    for t in np.unique(months):
        idx = np.flatnonzero(months == t)
        contribs = np.zeros((len(idx), data.X.shape[1]))
        block = data.X[idx]
        for c in np.unique(data.y[idx]):
            rows = np.flatnonzero(data.y[idx] == c)
            contribs[rows], _ = shap_values(model, block[rows], class_index=int(c))
        monthly[int(t)] = contribs
    report = aggregate_importance(monthly, data.feature_names)
    report.to_frame().to_csv(out / "rating_importance.csv", index=False)


# ---------------------------------------------------------------------------
# report


def report_table2(
    panel,
    plans: dict[str, WindowPlan],
    kinds=REGRESSOR_KINDS,
    feature_sets=("traditional", "all"),
    grids: dict[str, list[dict]] | None = None,
    seed: int = 0,
    threads: int = 1,
    keep_predictions: bool = False,
):
    """Model x metric x feature-set grid with Average and Benchmark rows.

    Returns (frame, predictions) where predictions maps
    (plan name, kind, feature set) -> PredictionSet when requested.
    """
    rows = []
    kept = {}
    for plan_name, plan in plans.items():
        per_set: dict[str, dict[str, dict]] = {fs: {} for fs in feature_sets}
        for fs in feature_sets:
            for kind in kinds:
                grid = (grids or {}).get(kind, DEFAULT_GRIDS[kind])
                pred = run_walk_forward(
                    panel, plan, kind, grid=grid, feature_set=fs,
                    seed=seed, threads=threads,
                )
                per_set[fs][kind] = evaluate(pred).to_dict()
                if keep_predictions:
                    kept[(plan_name, kind, fs)] = pred
            bench = run_benchmark(panel, plan)
            per_set[fs]["Benchmark"] = evaluate(bench).to_dict()
            if keep_predictions:
                kept[(plan_name, "Benchmark", fs)] = bench
        for kind in list(kinds) + ["Average", "Benchmark"]:
            row = {"plan": plan_name, "model": kind}
            for fs in feature_sets:
                if kind == "Average":
                    metrics = {
                        m: float(np.mean([per_set[fs][k][m] for k in kinds]))
                        for m in ("mae", "rmse", "r2", "r2_os")
                    }
                else:
                    metrics = per_set[fs][kind]
                for m in ("mae", "rmse", "r2", "r2_os"):
                    row[f"{fs}_{m}"] = metrics[m]
            rows.append(row)
    return pd.DataFrame(rows), kept


@main.command()
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@_with_options(_window_options)
@click.option("--models", default=",".join(REGRESSOR_KINDS), show_default=True)
@click.option("--grid", "grid_json", default=None,
              help="JSON object mapping model kind to a grid list")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--threads", default=0, type=int)
@click.option("--out-dir", default="out", show_default=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def report(panel_path, window_mode, train_window, val_window, from_month, to_month,
           models, grid_json, seed, threads, out_dir, config_path):
    """Out-of-sample summary across learners and both feature sets."""
    out = Path(out_dir)
    try:
        cfg = _merge_config(
            {
                "panel": panel_path, "window_mode": window_mode,
                "train_window": train_window, "val_window": val_window,
                "from_month": from_month, "to_month": to_month,
                "models": models, "grid": grid_json, "seed": seed,
                "threads": threads, "out_dir": out_dir,
            },
            config_path,
        )
        kinds = [k.strip() for k in cfg["models"].split(",") if k.strip()]
        unknown = [k for k in kinds if k not in REGRESSOR_KINDS]
        if unknown:
            raise ConfigError([f"unknown model {k!r}" for k in unknown])
        panel = preprocess(load_panel(cfg["panel"]))
        cfg["_panel"] = panel
        cfg["model"] = None
        cfg["features"] = "all"
        plan = _validated_plan(cfg)
        del cfg["_panel"], cfg["model"], cfg["features"]
        grids = None
        if cfg["grid"]:
            raw = json.loads(Path(cfg["grid"]).read_text()
                             if Path(cfg["grid"]).exists() else cfg["grid"])
            grids = dict(raw)
        threads = cfg["threads"] or os.cpu_count() or 1
        frame, _ = report_table2(
            panel, {cfg["window_mode"]: plan}, kinds=kinds, grids=grids,
            seed=cfg["seed"], threads=threads,
        )
        out.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out / "report.csv", index=False)
        _write_run_artifacts(out, "report", cfg, [cfg["panel"]])
    except Exception as exc:  # noqa: BLE001
        _fail(out, exc)


if __name__ == "__main__":
    main()
