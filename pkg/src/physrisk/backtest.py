"""Rolling-window backtest of frontier-selected portfolios against simple benchmarks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .anomaly import AnomalyPanel, fit_region_models, predict_at
from .climate import climate_weights, exposure_matrix
from .data import FirmProfile, MonthStamp, ReturnPanel, month_range
from .dependence import pearson_binary
from .errors import MissingCapWeights, NoDownside, TotalLoss, ZeroVolatility
from .estimation import estimate_inputs
from .front import STRATEGY_WEIGHTS, scalarize_select
from .mopso import MopsoConfig, run_mopso
from .objectives import PortfolioObjectives

BENCHMARKS = ("market-cap", "equal-weight")
EXTREMES = {"min-variance": 1, "min-cev": 2, "max-return": 0}
ALL_STRATEGIES = BENCHMARKS + tuple(EXTREMES) + tuple(STRATEGY_WEIGHTS)
METRIC_NAMES = ("CAGR", "Sharpe", "Sortino", "Drawdown", "r-CRE", "r-CEV")


# ------------------------------------------------------------------- metrics


def _as_returns(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.size == 0:
        raise ValueError("empty return series")
    return r


def cumulative_value(monthly_returns) -> np.ndarray:
    """Value path starting at 1 and compounded by each return (excludes the initial 1)."""
    return np.cumprod(1.0 + _as_returns(monthly_returns))


def cagr(monthly_returns) -> float:
    r = _as_returns(monthly_returns)
    if np.any(r <= -1.0):
        raise TotalLoss("a return of -100% or worse wipes out the portfolio")
    growth = float(np.exp(np.sum(np.log1p(r))))
    return growth ** (12.0 / r.size) - 1.0


def sharpe(monthly_returns, riskfree: float = 0.0) -> float:
    x = _as_returns(monthly_returns) - riskfree
    if x.size < 2:
        raise ValueError("Sharpe ratio needs at least two observations")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0 or sd < 1e-15 * max(1.0, abs(float(x.mean()))):
        raise ZeroVolatility("return series has zero volatility")
    return float(x.mean()) / sd * math.sqrt(12.0)


def sortino(monthly_returns, riskfree: float = 0.0) -> float:
    """Mean excess return over the downside RMS (all observations in the denominator), times sqrt(12)."""
    x = _as_returns(monthly_returns) - riskfree
    down = np.minimum(x, 0.0)
    if not np.any(down < 0):
        raise NoDownside("no return falls below the target")
    dd = math.sqrt(float(np.mean(down * down)))
    return float(x.mean()) / dd * math.sqrt(12.0)


def max_drawdown(monthly_returns) -> float:
    value = np.r_[1.0, cumulative_value(monthly_returns)]
    peak = np.maximum.accumulate(value)
    return float(np.max(1.0 - value / peak))


def realized_climate(weights, exposure, b) -> tuple[float, float]:
    """Sample mean and sample variance of ``x_t = alpha(w_t) . B_t``.

    ``weights`` is T x N, ``exposure`` the N x K matrix (or firm profiles)
    and ``b`` the K x T realized indicators over the holding months.
    """
    alphas = climate_weights(np.atleast_2d(weights), exposure)
    x = np.einsum("tk,kt->t", alphas, np.asarray(b, dtype=float))
    mean = float(x.mean())
    var = float(np.var(x, ddof=1)) if x.size > 1 else 0.0
    return mean, var


# -------------------------------------------------------------------- engine


@dataclass(frozen=True)
class BacktestConfig:
    start: MonthStamp
    end: MonthStamp
    window_years: int = 5
    strategies: tuple[str, ...] = ALL_STRATEGIES
    mopso_config: MopsoConfig = field(default_factory=MopsoConfig)
    riskfree: float = 0.0
    periods_per_month: float = 21
    climate: str = "cev"

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError("backtest start must precede end")
        unknown = set(self.strategies) - set(ALL_STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}")
        object.__setattr__(self, "strategies", tuple(self.strategies))

    @property
    def months(self) -> tuple[MonthStamp, ...]:
        return month_range(self.start, self.end)

    def to_dict(self) -> dict:
        return {
            "start": str(self.start),
            "end": str(self.end),
            "window_years": self.window_years,
            "strategies": list(self.strategies),
            "mopso": self.mopso_config.to_dict(),
            "riskfree": self.riskfree,
            "periods_per_month": self.periods_per_month,
            "climate": self.climate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BacktestConfig":
        d = dict(data)
        kwargs = {"start": MonthStamp.parse(d.pop("start")), "end": MonthStamp.parse(d.pop("end"))}
        if "mopso" in d:
            kwargs["mopso_config"] = MopsoConfig.from_dict(d.pop("mopso"))
        if "strategies" in d:
            kwargs["strategies"] = tuple(d.pop("strategies"))
        for key in ("window_years", "riskfree", "periods_per_month", "climate"):
            if key in d:
                kwargs[key] = d.pop(key)
        if d:
            raise ValueError(f"unknown backtest config keys {sorted(d)}")
        return cls(**kwargs)


@dataclass(frozen=True)
class BacktestData:
    """Everything the engine reads; ``caps`` rows are aligned with ``caps_months``."""

    anomalies: AnomalyPanel
    firms: Sequence[FirmProfile]
    monthly_returns: ReturnPanel
    daily_returns: ReturnPanel | None = None
    caps: np.ndarray | None = None
    caps_months: tuple[MonthStamp, ...] = ()


@dataclass
class StrategyResult:
    returns: np.ndarray
    weights: np.ndarray
    metrics: dict

    @property
    def cumulative(self) -> np.ndarray:
        return cumulative_value(self.returns)


@dataclass
class BacktestReport:
    months: tuple[MonthStamp, ...]
    strategies: dict[str, StrategyResult]
    firm_ids: tuple[str, ...] = ()

    def metrics_table(self) -> dict[str, dict]:
        return {name: res.metrics for name, res in self.strategies.items()}

    def to_dict(self) -> dict:
        return {
            "months": [str(m) for m in self.months],
            "firm_ids": list(self.firm_ids),
            "metrics": {name: {k: _json_float(v) for k, v in res.metrics.items()} for name, res in self.strategies.items()},
        }


def _json_float(v):
    return None if v is None or not np.isfinite(v) else float(v)


def _safe(fn, *args) -> float:
    try:
        return fn(*args)
    except (ZeroVolatility, NoDownside, TotalLoss):
        return float("nan")


def strategy_metrics(returns, weights, exposure, b, riskfree: float = 0.0) -> dict:
    r_cre, r_cev = realized_climate(weights, exposure, b)
    return {
        "CAGR": _safe(cagr, returns),
        "Sharpe": _safe(sharpe, returns, riskfree) if len(returns) > 1 else float("nan"),
        "Sortino": _safe(sortino, returns, riskfree),
        "Drawdown": max_drawdown(returns),
        "r-CRE": r_cre,
        "r-CEV": r_cev,
    }


def _cap_weights(data: BacktestData, month: MonthStamp) -> np.ndarray:
    if data.caps is None:
        raise MissingCapWeights("market-cap strategy requested but no capitalization data supplied")
    try:
        row = data.caps_months.index(month)
    except ValueError:
        raise MissingCapWeights(f"no capitalization row for {month}") from None
    caps = np.asarray(data.caps[row], dtype=float)
    return caps / caps.sum()


def _climate_inputs(anomalies: AnomalyPanel, month: MonthStamp) -> np.ndarray:
    """Event probabilities for ``month`` from models trained on data through ``month``."""
    models = fit_region_models(anomalies, train_end=month)
    return np.array([predict_at(m, month) for m in models])


def _month_column(panel: ReturnPanel, month: MonthStamp) -> int:
    hits = np.nonzero(panel.months == month.to_datetime64())[0]
    if hits.size != 1:
        raise ValueError(f"monthly returns do not contain exactly one observation for {month}")
    return int(hits[0])


def run_backtest(cfg: BacktestConfig, data: BacktestData) -> BacktestReport:
    """Re-optimize each month on the trailing window, then hold each strategy's pick for the month."""
    months = cfg.months
    n = len(data.firms)
    exposure = exposure_matrix(data.firms)
    anomalies = data.anomalies
    corr = pearson_binary(anomalies.b)
    b_idx = [anomalies.months.index(m) for m in months]
    b_hold = anomalies.b[:, b_idx]
    optimized = [s for s in cfg.strategies if s not in BENCHMARKS]

    weights = {s: np.empty((len(months), n)) for s in cfg.strategies}
    for i, month in enumerate(months):
        if "market-cap" in weights:
            weights["market-cap"][i] = _cap_weights(data, month)
        if "equal-weight" in weights:
            weights["equal-weight"][i] = 1.0 / n
        if not optimized:
            continue
        if n == 1:
            for s in optimized:
                weights[s][i] = 1.0
            continue
        inputs = estimate_inputs(
            data.monthly_returns, month, data.daily_returns, cfg.window_years, cfg.periods_per_month
        )
        p = _climate_inputs(anomalies, month - 1)
        objective = PortfolioObjectives(inputs.expected_returns, inputs.covariance, exposure, p, corr, cfg.climate)
        archive = run_mopso(objective, n, cfg.mopso_config.replace(seed=cfg.mopso_config.seed + i))
        F = archive.objectives
        for s in optimized:
            if s in EXTREMES:
                pick = int(np.argmin(F[:, EXTREMES[s]]))
            else:
                pick = scalarize_select(F, STRATEGY_WEIGHTS[s])
            weights[s][i] = archive.positions[pick]

    cols = [_month_column(data.monthly_returns, m) for m in months]
    realized = data.monthly_returns.returns[:, cols]  # N x T
    results = {}
    for s, W in weights.items():
        r = np.einsum("tn,nt->t", W, realized)
        results[s] = StrategyResult(r, W, strategy_metrics(r, W, exposure, b_hold, cfg.riskfree))
    return BacktestReport(months, results, tuple(data.monthly_returns.firm_ids))
