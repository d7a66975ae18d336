"""Return regressions on extreme-event indicators with Newey-West standard errors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import norm

from .errors import CollinearDesign


@dataclass(frozen=True)
class RegressionSpec:
    response: np.ndarray
    design: np.ndarray
    names: tuple[str, ...]
    hac_lags: int | None = None  # None -> automatic Newey-West rule
    groups: np.ndarray | None = None  # series labels; lags never cross a series boundary

    def __post_init__(self):
        y = np.asarray(self.response, dtype=float)
        X = np.asarray(self.design, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.size or X.shape[1] != len(self.names):
            raise ValueError("response, design and names are inconsistent")
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "names", tuple(self.names))


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    coefficients: np.ndarray
    hac_standard_errors: np.ndarray
    p_values: np.ndarray
    n_obs: int
    residuals: np.ndarray = field(repr=False)
    hac_lags: int = 0

    def _idx(self, name: str) -> int:
        return self.names.index(name)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self._idx(name)])

    def se(self, name: str) -> float:
        return float(self.hac_standard_errors[self._idx(name)])

    def pvalue(self, name: str) -> float:
        return float(self.p_values[self._idx(name)])


def default_hac_lags(n: int) -> int:
    """Automatic Newey-West bandwidth floor(4 (T/100)^(2/9))."""
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def _redundant_column(X: np.ndarray, names: Sequence[str]) -> str:
    full = np.linalg.matrix_rank(X)
    for j in range(X.shape[1]):
        if np.linalg.matrix_rank(np.delete(X, j, axis=1)) == full:
            return names[j]
    return names[-1]


def ols(spec: RegressionSpec) -> RegressionResult:
    """Least-squares coefficients; standard errors and p-values are left as NaN."""
    X, y = spec.design, spec.response
    n, k = X.shape
    if n <= k:
        raise CollinearDesign(f"{n} observations for {k} coefficients")
    if np.linalg.matrix_rank(X) < k:
        raise CollinearDesign(f"design is rank deficient; column {_redundant_column(X, spec.names)!r} is redundant")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    nan = np.full(k, np.nan)
    return RegressionResult(spec.names, beta, nan, nan.copy(), n, y - X @ beta)


def _series_slices(groups, n: int) -> list[slice]:
    if groups is None:
        return [slice(0, n)]
    g = np.asarray(groups)
    cuts = np.r_[0, np.nonzero(g[1:] != g[:-1])[0] + 1, n]
    return [slice(a, b) for a, b in zip(cuts[:-1], cuts[1:])]


def newey_west_covariance(design, residuals, lags: int, groups=None) -> np.ndarray:
    """Sandwich covariance with Bartlett weights 1 - l/(L+1).

    With ``groups`` the autocovariance terms are summed within each
    contiguous run of equal labels only (stacked Newey-West).
    """
    X = np.asarray(design, dtype=float)
    u = np.asarray(residuals, dtype=float)
    scores = X * u[:, None]
    meat = scores.T @ scores
    for sl in _series_slices(groups, X.shape[0]):
        s = scores[sl]
        for lag in range(1, min(lags, s.shape[0] - 1) + 1):
            gamma = s[lag:].T @ s[:-lag]
            meat += (1.0 - lag / (lags + 1.0)) * (gamma + gamma.T)
    bread = np.linalg.inv(X.T @ X)
    return bread @ meat @ bread


def hac_errors(spec: RegressionSpec, residuals, design=None) -> np.ndarray:
    X = spec.design if design is None else np.asarray(design, dtype=float)
    lags = _resolve_lags(spec)
    if lags >= X.shape[0]:
        raise ValueError("hac_lags must be smaller than the number of observations")
    return np.sqrt(np.diag(newey_west_covariance(X, residuals, lags, spec.groups)))


def classical_errors(spec: RegressionSpec, residuals) -> np.ndarray:
    X = spec.design
    n, k = X.shape
    s2 = float(residuals @ residuals) / (n - k)
    return np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))


def _resolve_lags(spec: RegressionSpec) -> int:
    if spec.hac_lags is not None:
        return int(spec.hac_lags)
    longest = max(sl.stop - sl.start for sl in _series_slices(spec.groups, spec.design.shape[0]))
    return default_hac_lags(longest)


def fit(spec: RegressionSpec, cov_type: str = "hac") -> RegressionResult:
    """OLS with HAC (default) or classical standard errors and normal p-values."""
    res = ols(spec)
    if cov_type == "hac":
        se = hac_errors(spec, res.residuals)
        lags = _resolve_lags(spec)
    elif cov_type == "classical":
        se = classical_errors(spec, res.residuals)
        lags = 0
    else:
        raise ValueError(f"unknown cov_type {cov_type!r}")
    p = 2.0 * norm.sf(np.abs(res.coefficients / se))
    return RegressionResult(spec.names, res.coefficients, se, p, res.n_obs, res.residuals, lags)


def sector_continent_regression(
    sector_returns, market_returns, riskfree, b, sector: str = "", region: str = "", hac_lags: int | None = None
) -> RegressionResult:
    """Sector excess return on market excess return and one region's event indicator."""
    rs = np.asarray(sector_returns, dtype=float)
    rm = np.asarray(market_returns, dtype=float)
    rf = np.broadcast_to(np.asarray(riskfree, dtype=float), rs.shape)
    bk = np.asarray(b, dtype=float)
    if not (rs.shape == rm.shape == bk.shape):
        raise ValueError("sector, market and indicator series must be aligned")
    X = np.column_stack([np.ones_like(rs), rm - rf, bk])
    return fit(RegressionSpec(rs - rf, X, ("const", "mkt", "gamma"), hac_lags))


def stack_panel(
    sector_returns: pd.DataFrame, market_returns, riskfree, b, months, region_names: Sequence[str]
) -> pd.DataFrame:
    """Long table keyed by (sector, region, t) from wide sector returns and a K x T indicator matrix.

    Each sector's return series is paired with every region's indicator.
    """
    rm = np.asarray(market_returns, dtype=float)
    rf = np.broadcast_to(np.asarray(riskfree, dtype=float), rm.shape)
    b = np.asarray(b)
    moy = np.array([m.month for m in months])
    frames = []
    for sector in sector_returns.columns:
        rs = sector_returns[sector].to_numpy(dtype=float)
        for k, region in enumerate(region_names):
            frames.append(
                pd.DataFrame(
                    {
                        "sector": sector,
                        "region": region,
                        "t": np.arange(rm.size),
                        "month": moy,
                        "excess": rs - rf,
                        "mkt_excess": rm - rf,
                        "b": b[k].astype(float),
                    }
                )
            )
    return pd.concat(frames, ignore_index=True)


def _dummies(values: pd.Series, prefix: str, drop) -> tuple[np.ndarray, list[str]]:
    levels = sorted(values.unique())
    drop = levels[0] if drop is None else drop
    keep = [lv for lv in levels if lv != drop]
    mat = np.column_stack([(values.to_numpy() == lv).astype(float) for lv in keep]) if keep else np.empty((len(values), 0))
    return mat, [f"{prefix}[{lv}]" for lv in keep]


def _panel_spec(frame: pd.DataFrame, fixed_effects, hac_lags, drop_levels) -> RegressionSpec:
    frame = frame.sort_values(["sector", "region", "t"], kind="mergesort")
    cols = [np.ones(len(frame)), frame["mkt_excess"].to_numpy(float), frame["b"].to_numpy(float)]
    names = ["const", "mkt", "gamma"]
    drop_levels = drop_levels or {}
    for fe in fixed_effects:
        mat, labels = _dummies(frame[fe], fe, drop_levels.get(fe))
        cols.extend(mat.T)
        names.extend(labels)
    groups = (frame["sector"].astype(str) + "\x1f" + frame["region"].astype(str)).to_numpy()
    return RegressionSpec(frame["excess"].to_numpy(float), np.column_stack(cols), tuple(names), hac_lags, groups)


def panel_regression(
    frame: pd.DataFrame,
    fixed_effects: Sequence[str] = ("month", "region"),
    pooled_gamma: bool = False,
    hac_lags: int | None = None,
    drop_levels: dict | None = None,
) -> dict[str, RegressionResult]:
    """Fixed-effects panel regressions on a long table from :func:`stack_panel`.

    Returns one result per sector, or a single entry keyed ``"ALL"`` when
    ``pooled_gamma`` pools every sector and region.
    """
    for fe in fixed_effects:
        if fe not in ("month", "region"):
            raise ValueError(f"unsupported fixed effect {fe!r}")
    if pooled_gamma:
        return {"ALL": fit(_panel_spec(frame, fixed_effects, hac_lags, drop_levels))}
    return {
        sector: fit(_panel_spec(sub, fixed_effects, hac_lags, drop_levels))
        for sector, sub in frame.groupby("sector", sort=False)
    }
