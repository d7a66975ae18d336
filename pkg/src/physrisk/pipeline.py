"""File-level pipeline stages, artifact formats and the end-to-end runner.

Each ``*_stage`` function reads its inputs from disk, writes its artifacts and
returns the paths it wrote. The command line is a thin layer over these.
"""
from __future__ import annotations

import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from . import __version__
from .anomaly import (
    AnomalyPanel,
    LogisticEventModel,
    build_anomaly_panel,
    evaluate_classifier,
    fit_region_models,
    predict_at,
    predict_probability,
)
from .backtest import BacktestConfig, BacktestData, run_backtest
from .climate import climate_exposure, exposure_matrix, scenario_correlations
from .data import (
    MonthStamp,
    RegionId,
    compound_to_monthly,
    generate_synthetic_bundle,
    load_firm_profiles,
    load_monthly_table,
    load_return_panel,
    load_temperature_panel,
    make_regions,
    write_firm_profiles,
    write_monthly_table,
    write_return_panel,
    write_temperature_panel,
)
from .dependence import CorrelationBounds, check_admissibility, correlation_bounds, mean_probability, pearson_binary
from .errors import ConditioningError, MissingFile, ParseError, PhysRiskError, SingleClassError
from .estimation import conditioning_gate, estimate_inputs
from .front import (
    STRATEGY_WEIGHTS,
    active_positions,
    default_reference,
    distance_heatmap,
    hypervolume,
    scalarize_select,
    slice_by_variance,
    spacing,
)
from .mopso import MopsoConfig, run_mopso
from .objectives import PortfolioObjectives
from .regression import panel_regression, sector_continent_regression, stack_panel, stars
from .sweep import summarize, sweep_runs, write_sweep_csv


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path


def _read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", row=exc.lineno, col=exc.colno) from None


def _parse_range(text: str) -> tuple[MonthStamp, MonthStamp]:
    a, b = text.split(":")
    return MonthStamp.parse(a), MonthStamp.parse(b)


# ------------------------------------------------------------ anomaly files


def write_anomalies(panel: AnomalyPanel, path) -> Path:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year_month", "region", "z", "b"])
        for t, month in enumerate(panel.months):
            for r in panel.regions:
                w.writerow([str(month), r.name, _fmt(panel.z[r.index, t]), int(panel.b[r.index, t])])
    return Path(path)


def load_anomalies(path, threshold: float = 2.0) -> AnomalyPanel:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"file not found: {path}")
    frame = pd.read_csv(path, dtype={"year_month": str, "region": str})
    missing = {"year_month", "region", "z", "b"} - set(frame.columns)
    if missing:
        raise ParseError(f"{path}: missing columns {sorted(missing)}", row=0)
    names = list(dict.fromkeys(frame["region"]))
    months = sorted({MonthStamp.parse(m) for m in frame["year_month"]})
    z = frame.pivot(index="region", columns="year_month", values="z").loc[names, [str(m) for m in months]]
    b = frame.pivot(index="region", columns="year_month", values="b").loc[names, [str(m) for m in months]]
    if z.isna().any().any():
        raise ParseError(f"{path}: incomplete region x month grid")
    return AnomalyPanel(make_regions(names), tuple(months), z.to_numpy(float), b.to_numpy().astype(np.int8), threshold)


def model_to_dict(model: LogisticEventModel, scores=None) -> dict:
    d = {
        "region": model.region.name,
        "beta0": model.beta0,
        "beta1": model.beta1,
        "beta2": model.beta2,
        "time_origin": str(model.time_origin),
        "time_scale": model.time_scale,
        "std_errors": list(model.std_errors),
    }
    if scores is not None:
        d.update(auroc=scores.auroc, aupr=scores.aupr, aupr_random=scores.aupr_random)
    return d


def load_models(path) -> list[LogisticEventModel]:
    data = _read_json(path)
    models = []
    for i, m in enumerate(data["regions"]):
        models.append(
            LogisticEventModel(
                region=RegionId(m["region"], i),
                beta0=float(m["beta0"]),
                beta1=float(m["beta1"]),
                beta2=float(m["beta2"]),
                time_origin=MonthStamp.parse(m["time_origin"]),
                time_scale=float(m.get("time_scale", 1.0)),
                std_errors=tuple(m.get("std_errors", (np.nan,) * 3)),
            )
        )
    return models


def fit_anomalies_stage(
    temps, out, model_out, baseline=(1960, 1990), threshold: float = 2.0, train_end: MonthStamp | None = None
) -> list[Path]:
    panel = load_temperature_panel(temps)
    anomalies = build_anomaly_panel(panel, tuple(baseline), threshold)
    models = fit_region_models(anomalies, train_end)
    entries = []
    for m in models:
        last = len(anomalies.months) if train_end is None else min(train_end.ordinal - anomalies.months[0].ordinal + 1, len(anomalies.months))
        t = np.arange(last)
        scores = evaluate_classifier(predict_probability(m, t), anomalies.b[m.region.index, :last])
        entries.append(model_to_dict(m, scores))
    doc = {
        "baseline": list(baseline),
        "threshold": threshold,
        "train_end": str(train_end) if train_end is not None else str(anomalies.months[-1]),
        "regions": entries,
    }
    return [write_anomalies(anomalies, out), _write_json(doc, model_out)]


# ------------------------------------------------------------- bounds files


BOUNDS_COLUMNS = ("region_i", "region_j", "pearson", "rho_min", "rho_max", "admissible")


def bounds_stage(anomalies_path, model_path, out, horizon: tuple[MonthStamp, MonthStamp] | None = None) -> list[Path]:
    anomalies = load_anomalies(anomalies_path)
    models = load_models(model_path)
    names = [r.name for r in anomalies.regions]
    if [m.region.name for m in models] != names:
        raise ParseError("model regions do not match the anomaly regions")
    if horizon is None:
        horizon = (anomalies.months[0], anomalies.months[-1])
    lo, hi = horizon
    cols = [i for i, m in enumerate(anomalies.months) if lo <= m <= hi]
    corr = pearson_binary(anomalies.b[:, cols], names)
    pbar = np.array([mean_probability(m, horizon) for m in models])
    bounds = correlation_bounds(pbar)
    bad = {(v.i, v.j) for v in check_admissibility(corr, bounds)}
    with Path(out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BOUNDS_COLUMNS)
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                w.writerow(
                    [names[i], names[j], _fmt(corr[i, j]), _fmt(bounds.rho_min[i, j]), _fmt(bounds.rho_max[i, j]),
                     int((i, j) not in bad)]
                )
    return [Path(out)]


def load_bounds(path, region_names: Sequence[str]) -> tuple[np.ndarray, CorrelationBounds]:
    """Empirical correlation matrix and bounds from a bounds file, in ``region_names`` order."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"file not found: {path}")
    frame = pd.read_csv(path, dtype={"region_i": str, "region_j": str})
    pos = {n: i for i, n in enumerate(region_names)}
    k = len(region_names)
    mats = {c: np.eye(k) for c in ("pearson", "rho_min", "rho_max")}
    seen = np.eye(k, dtype=bool)
    for row in frame.itertuples(index=False):
        try:
            i, j = pos[row.region_i], pos[row.region_j]
        except KeyError as exc:
            raise ParseError(f"{path}: unknown region {exc.args[0]!r}") from None
        for c in mats:
            mats[c][i, j] = mats[c][j, i] = float(getattr(row, c))
        seen[i, j] = seen[j, i] = True
    if not seen.all():
        raise ParseError(f"{path}: some region pairs are missing")
    return mats["pearson"], CorrelationBounds(mats["rho_min"], mats["rho_max"], np.full(k, np.nan))


# ---------------------------------------------------------- climate metrics


def load_weights(path) -> tuple[tuple[str, ...], np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"file not found: {path}")
    frame = pd.read_csv(path, dtype={"firm_id": str})
    return tuple(frame["firm_id"]), frame["weight"].to_numpy(float)


def write_weights(firm_ids: Sequence[str], w, path) -> Path:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["firm_id", "weight"])
        for f, x in zip(firm_ids, w):
            wr.writerow([f, _fmt(x)])
    return Path(path)


def _probabilities_at(models: Sequence[LogisticEventModel], at: MonthStamp) -> np.ndarray:
    return np.array([predict_at(m, at) for m in models])


def _order_firms(firms, firm_ids: Sequence[str]):
    by_id = {f.firm_id: f for f in firms}
    missing = [f for f in firm_ids if f not in by_id]
    if missing:
        raise ParseError(f"firms file lacks {missing}")
    return [by_id[f] for f in firm_ids]


def climate_metrics_stage(weights_path, firms_path, model_path, corr_path, at: MonthStamp, scenario="empirical", out=None):
    models = load_models(model_path)
    regions = tuple(m.region for m in models)
    names = [r.name for r in regions]
    firms = load_firm_profiles(firms_path, regions)
    firm_ids, w = load_weights(weights_path)
    firms = _order_firms(firms, firm_ids)
    empirical, bounds = load_bounds(corr_path, names)
    corr = scenario_correlations(scenario, empirical, bounds)
    exp = climate_exposure(w, firms, _probabilities_at(models, at), corr)
    header = [f"alpha_{n}" for n in names] + ["cre", "cev", "idio", "sys"]
    row = [*exp.alphas, exp.cre, exp.cev, exp.idiosyncratic_term, exp.systemic_term]
    fh = sys.stdout if out is None else Path(out).open("w", newline="", encoding="utf-8")
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerow([_fmt(x) for x in row])
    finally:
        if out is not None:
            fh.close()
    return [] if out is None else [Path(out)]


# -------------------------------------------------------------- regression


REGRESS_COLUMNS = ("sector", "region", "gamma", "se", "pvalue", "stars")


def regress_stage(returns_path, market_path, riskfree_path, anomalies_path, out, mode="pair", hac_lags=None) -> list[Path]:
    s_months, sectors, s_vals = load_monthly_table(returns_path)
    m_months, _, m_vals = load_monthly_table(market_path)
    f_months, _, f_vals = load_monthly_table(riskfree_path)
    anomalies = load_anomalies(anomalies_path)
    common = sorted(set(s_months) & set(m_months) & set(f_months) & set(anomalies.months))
    if not common:
        raise ParseError("return, market, risk-free and anomaly files share no months")
    idx = lambda months: [months.index(m) for m in common]  # noqa: E731
    rs = s_vals[idx(s_months)]
    rm = m_vals[idx(m_months), 0]
    rf = f_vals[idx(f_months), 0]
    b = anomalies.b[:, idx(anomalies.months)]
    names = [r.name for r in anomalies.regions]
    rows = []
    if mode == "pair":
        for j, sector in enumerate(sectors):
            for r in anomalies.regions:
                res = sector_continent_regression(rs[:, j], rm, rf, b[r.index], sector, r.name, hac_lags)
                rows.append((sector, r.name, res.coef("gamma"), res.se("gamma"), res.pvalue("gamma")))
    elif mode in ("panel", "pooled"):
        frame = stack_panel(pd.DataFrame(rs, columns=list(sectors)), rm, rf, b, common, names)
        results = panel_regression(frame, pooled_gamma=mode == "pooled", hac_lags=hac_lags)
        for sector, res in results.items():
            rows.append((sector, "ALL", res.coef("gamma"), res.se("gamma"), res.pvalue("gamma")))
    else:
        raise ValueError(f"unknown regression mode {mode!r}")
    with Path(out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REGRESS_COLUMNS)
        for sector, region, g, se, p in rows:
            w.writerow([sector, region, _fmt(g), _fmt(se), _fmt(p), stars(p)])
    return [Path(out)]


# -------------------------------------------------------------- estimation


def estimate_stage(returns_path, asof: MonthStamp, out, frequency="monthly", window_years=5, periods_per_month=21, strict=False, warn=None):
    panel = load_return_panel(returns_path, frequency)
    if frequency == "daily":
        inputs = estimate_inputs(compound_to_monthly(panel), asof, panel, window_years, periods_per_month)
    else:
        inputs = estimate_inputs(panel, asof, None, window_years, periods_per_month)
    gate = conditioning_gate(inputs.covariance)
    doc = {
        "asof": str(asof),
        "firm_ids": list(inputs.firm_ids),
        "mu": inputs.expected_returns.tolist(),
        "sigma": inputs.covariance.tolist(),
        "intensity": inputs.shrinkage_intensity,
        "condition_number": inputs.condition_number,
        "gate_passed": bool(gate),
    }
    path = _write_json(doc, out)
    if not gate:
        message = f"covariance condition number {gate.condition_number:.4g} exceeds 1000"
        if strict:
            raise ConditioningError(message)
        (warn or (lambda m: print(f"warning: {m}", file=sys.stderr)))(message)
    return [path]


def load_inputs(path) -> dict:
    doc = _read_json(path)
    doc["mu"] = np.asarray(doc["mu"], dtype=float)
    doc["sigma"] = np.asarray(doc["sigma"], dtype=float)
    return doc


# ------------------------------------------------------------ optimization


def _objective_from_files(inputs_path, firms_path, model_path, corr_path, at=None, scenario="empirical", climate="cev"):
    inputs = load_inputs(inputs_path)
    models = load_models(model_path)
    regions = tuple(m.region for m in models)
    firms = _order_firms(load_firm_profiles(firms_path, regions), inputs["firm_ids"])
    at = MonthStamp.parse(inputs["asof"]) - 1 if at is None else at
    empirical, bounds = load_bounds(corr_path, [r.name for r in regions])
    corr = scenario_correlations(scenario, empirical, bounds)
    objective = PortfolioObjectives(
        inputs["mu"], inputs["sigma"], exposure_matrix(firms), _probabilities_at(models, at), corr, climate
    )
    return objective, inputs["firm_ids"]


def load_mopso_config(path=None, seed: int | None = None) -> MopsoConfig:
    cfg = MopsoConfig() if path is None else MopsoConfig.from_dict(_read_json(path))
    return cfg if seed is None else cfg.replace(seed=seed)


def write_front(positions, objectives, path) -> Path:
    n = positions.shape[1]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["portfolio_id", "f1", "f2", "f3", *(f"w_{i + 1}" for i in range(n))])
        for pid, (f, x) in enumerate(zip(objectives, positions)):
            w.writerow([pid, *(_fmt(v) for v in f), *(_fmt(v) for v in x)])
    return Path(path)


def load_front(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(portfolio_ids, objectives P x 3, positions P x N)."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"file not found: {path}")
    frame = pd.read_csv(path)
    wcols = [c for c in frame.columns if c.startswith("w_")]
    return frame["portfolio_id"].to_numpy(int), frame[["f1", "f2", "f3"]].to_numpy(float), frame[wcols].to_numpy(float)


def optimize_stage(inputs_path, firms_path, model_path, corr_path, out, config_path=None, seed=None, at=None, scenario="empirical", climate="cev"):
    objective, _ = _objective_from_files(inputs_path, firms_path, model_path, corr_path, at, scenario, climate)
    archive = run_mopso(objective, objective.n_assets, load_mopso_config(config_path, seed))
    return [write_front(archive.positions, archive.objectives, out)]


# ----------------------------------------------------------- front analysis


def analyze_front_stage(front_path, out, heatmap=None, slices=None, ref="auto", bins: int = 6) -> list[Path]:
    ids, F, W = load_front(front_path)
    reference = default_reference(F) if ref in (None, "auto") else np.array([float(x) for x in str(ref).split(",")])
    sl = slice_by_variance(F, bins)
    doc = {
        "n_portfolios": int(len(F)),
        "reference_point": reference.tolist(),
        "hypervolume": hypervolume(F, reference),
        "spacing": spacing(F) if len(F) >= 2 else None,
        "active_positions": [active_positions(w) for w in W],
        "selections": {name: int(ids[scalarize_select(F, wts)]) for name, wts in STRATEGY_WEIGHTS.items()},
        "slices": [
            {
                "bin": k,
                "lower": s.lower,
                "upper": s.upper,
                "count": int(s.members.size),
                "quadratic_fit": None if s.quadratic_fit is None else s.quadratic_fit.tolist(),
            }
            for k, s in enumerate(sl)
        ],
    }
    written = [_write_json(doc, out)]
    if heatmap is not None:
        D, order = distance_heatmap(W, F[:, 1])
        with Path(heatmap).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["portfolio_id", *(int(ids[i]) for i in order)])
            for r, i in enumerate(order):
                w.writerow([int(ids[i]), *(_fmt(v) for v in D[r])])
        written.append(Path(heatmap))
    if slices is not None:
        with Path(slices).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin", "lower", "upper", "portfolio_id", "f2", "cev", "expected_return"])
            for k, s in enumerate(sl):
                for m, x, y in zip(s.members, s.climate, s.expected_return):
                    w.writerow([k, _fmt(s.lower), _fmt(s.upper), int(ids[m]), _fmt(F[m, 1]), _fmt(x), _fmt(y)])
        written.append(Path(slices))
    return written


# ---------------------------------------------------------------- backtest


def load_backtest_config(path, seed=None) -> tuple[BacktestConfig, dict]:
    """Backtest config plus the anomaly settings (``baseline``, ``threshold``) stored beside it."""
    doc = dict(_read_json(path))
    extra = {"baseline": tuple(doc.pop("baseline", (1960, 1990))), "threshold": float(doc.pop("threshold", 2.0))}
    cfg = BacktestConfig.from_dict(doc)
    if seed is not None:
        cfg = BacktestConfig(**{**cfg.__dict__, "mopso_config": cfg.mopso_config.replace(seed=seed)})
    return cfg, extra


def backtest_stage(config_path, temps, firms_path, returns_path, out, series=None, caps_path=None, daily_path=None, seed=None):
    cfg, extra = load_backtest_config(config_path, seed)
    anomalies = build_anomaly_panel(load_temperature_panel(temps), extra["baseline"], extra["threshold"])
    firms = load_firm_profiles(firms_path, anomalies.regions)
    monthly = load_return_panel(returns_path, "monthly")
    firms = _order_firms(firms, monthly.firm_ids)
    daily = load_return_panel(daily_path, "daily") if daily_path is not None else None
    caps, caps_months = None, ()
    if caps_path is not None:
        caps_months, cols, caps = load_monthly_table(caps_path)
        caps = caps[:, [cols.index(f) for f in monthly.firm_ids]]
    report = run_backtest(cfg, BacktestData(anomalies, firms, monthly, daily, caps, caps_months))
    doc = {"config": cfg.to_dict(), **report.to_dict()}
    written = [_write_json(doc, out)]
    if series is not None:
        names = list(report.strategies)
        values = np.column_stack([report.strategies[s].returns for s in names])
        write_monthly_table(report.months, names, values, series)
        written.append(Path(series))
    return written, report


# ------------------------------------------------------------------- sweep


def sweep_stage(inputs_path, firms_path, model_path, corr_path, out, grid, replications=10, config_path=None, seed=0, jobs=1, at=None, scenario="empirical"):
    objective, _ = _objective_from_files(inputs_path, firms_path, model_path, corr_path, at, scenario)
    runs = sweep_runs(objective, objective.n_assets, grid, replications, load_mopso_config(config_path), seed, jobs)
    rows, _ = summarize(runs)
    write_sweep_csv(rows, out)
    return [Path(out)]


# ---------------------------------------------------------------- synthetic


def synth_stage(out_dir, seed=0, n_firms=10, k_regions=6, t_months=1032, return_months=84, n_sectors=3) -> list[Path]:
    """Write a complete synthetic input set plus matching configs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    b = generate_synthetic_bundle(seed, n_firms, k_regions, t_months, return_months=return_months)
    months = b.return_months
    paths = {
        "temperatures": out / "temperatures.csv",
        "firms": out / "firms.csv",
        "returns": out / "returns.csv",
        "daily": out / "daily_returns.csv",
        "caps": out / "caps.csv",
        "sector_returns": out / "sector_returns.csv",
        "market": out / "market.csv",
        "riskfree": out / "rf.csv",
        "mopso": out / "mopso.json",
        "backtest": out / "backtest.json",
    }
    write_temperature_panel(b.temperatures, paths["temperatures"])
    write_firm_profiles(b.firms, b.regions, paths["firms"])
    write_return_panel(b.monthly_returns, paths["returns"])
    write_return_panel(b.daily_returns, paths["daily"])
    ids = b.monthly_returns.firm_ids
    write_monthly_table(months, ids, b.caps, paths["caps"])

    R = b.monthly_returns.returns.T  # T x N
    capw = b.caps / b.caps.sum(axis=1, keepdims=True)
    write_monthly_table(months, ["market"], (capw * R).sum(axis=1)[:, None], paths["market"])
    write_monthly_table(months, ["rf"], np.zeros((len(months), 1)), paths["riskfree"])
    sector_of = np.arange(n_firms) % max(1, min(n_sectors, n_firms))
    sectors = sorted(set(sector_of))
    cols = []
    for s in sectors:
        m = sector_of == s
        cw = b.caps[:, m] / b.caps[:, m].sum(axis=1, keepdims=True)
        cols.append((cw * R[:, m]).sum(axis=1))
    write_monthly_table(months, [f"S{s + 1}" for s in sectors], np.column_stack(cols), paths["sector_returns"])

    _write_json(MopsoConfig(seed=seed).to_dict(), paths["mopso"])
    if return_months > 60:
        bt = BacktestConfig(months[60], months[-1], mopso_config=MopsoConfig(seed=seed))
        _write_json(bt.to_dict(), paths["backtest"])
    else:
        del paths["backtest"]
    return list(paths.values())


# ---------------------------------------------------------------- manifest


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: list[str]
    seed: int | None
    version: str = __version__
    config_hashes: dict[str, str] = field(default_factory=dict)
    stage_seconds: dict[str, float] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)

    def hash_inputs(self, paths: dict) -> None:
        for name, p in paths.items():
            if p is not None and Path(p).exists():
                self.config_hashes[name] = sha256_file(p)

    def record(self, written: Sequence[Path], root=None) -> None:
        for p in written:
            key = str(Path(p).relative_to(root)) if root is not None and Path(p).is_relative_to(root) else str(p)
            self.artifacts[key] = sha256_file(p)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "version": self.version,
            "config_hashes": self.config_hashes,
            "stage_seconds": self.stage_seconds,
            "artifacts": self.artifacts,
        }

    def write(self, path) -> Path:
        return _write_json(self.to_dict(), path)


class StageFailure(PhysRiskError):
    """Wraps the first failing stage's error with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.code = getattr(cause, "code", type(cause).__name__)

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self.cause), "stage": self.stage}


class _Stages:
    def __init__(self, manifest: RunManifest, root: Path):
        self.manifest = manifest
        self.root = root

    def run(self, name: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except Exception as exc:  # re-raised with the stage attached
            raise StageFailure(name, exc) from exc
        finally:
            self.manifest.stage_seconds[name] = time.perf_counter() - t0
        written = result[0] if isinstance(result, tuple) else result
        self.manifest.record(written, self.root)
        return result


def run_all(
    out_dir,
    temps,
    firms,
    returns,
    caps=None,
    daily=None,
    mopso_config=None,
    backtest_config=None,
    seed: int = 0,
    train_end: MonthStamp | None = None,
    baseline=(1960, 1990),
    threshold: float = 2.0,
    command: Sequence[str] = (),
    strict: bool = False,
) -> RunManifest:
    """Run every stage in order and write ``manifest.json`` beside the artifacts.

    The optimization snapshot uses the month after the last return observation
    as its as-of date. The first failing stage raises :class:`StageFailure`.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(list(command), seed)
    manifest.hash_inputs(
        {"temperatures": temps, "firms": firms, "returns": returns, "caps": caps, "daily": daily,
         "mopso": mopso_config, "backtest": backtest_config}
    )
    st = _Stages(manifest, out)
    a, model, bounds = out / "anomalies.csv", out / "logistic.json", out / "bounds.csv"
    st.run("fit-anomalies", fit_anomalies_stage, temps, a, model, baseline, threshold, train_end)
    st.run("bounds", bounds_stage, a, model, bounds)

    def _climate():
        if not Path(firms).exists():
            raise MissingFile(f"file not found: {firms}")
        ids = load_return_panel(returns, "monthly").firm_ids
        write_weights(ids, np.full(len(ids), 1.0 / len(ids)), out / "equal_weights.csv")
        last = load_anomalies(a).months[-1]
        return [out / "equal_weights.csv"] + climate_metrics_stage(
            out / "equal_weights.csv", firms, model, bounds, last, "empirical", out / "climate.csv"
        )

    st.run("climate", _climate)
    monthly = load_return_panel(returns, "monthly")
    asof = MonthStamp.from_datetime64(monthly.dates[-1]) + 1
    if daily is not None:
        st.run("estimate", estimate_stage, daily, asof, out / "inputs.json", "daily", strict=strict)
    else:
        st.run("estimate", estimate_stage, returns, asof, out / "inputs.json", "monthly", strict=strict)
    st.run("optimize", optimize_stage, out / "inputs.json", firms, model, bounds, out / "front.csv", mopso_config, seed)
    st.run(
        "analyze-front", analyze_front_stage, out / "front.csv", out / "metrics.json",
        out / "heatmap.csv", out / "slices.csv",
    )
    if backtest_config is not None:
        st.run(
            "backtest", backtest_stage, backtest_config, temps, firms, returns, out / "report.json",
            out / "series.csv", caps, daily, seed,
        )
    manifest.write(out / "manifest.json")
    return manifest
