"""Optimizer inputs: windowed mean returns and a shrunk, monthly-scaled covariance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MonthStamp, ReturnPanel
from .errors import InsufficientHistory, ParseError

CONDITION_LIMIT = 1000.0
EIGEN_CLIP = 1e-10


@dataclass(frozen=True)
class CovarianceEstimate:
    covariance: np.ndarray
    shrinkage_intensity: float
    condition_number: float
    sample_condition_number: float
    n_obs: int


@dataclass(frozen=True)
class FinancialInputs:
    expected_returns: np.ndarray
    covariance: np.ndarray
    condition_number: float
    shrinkage_intensity: float
    firm_ids: tuple[str, ...] = ()
    asof: MonthStamp | None = None


@dataclass(frozen=True)
class GateResult:
    passed: bool
    condition_number: float

    def __bool__(self) -> bool:
        return self.passed


def condition_number(matrix) -> float:
    eig = np.linalg.eigvalsh(np.asarray(matrix, dtype=float))
    if eig[0] <= 0:
        return float("inf")
    return float(eig[-1] / eig[0])


def conditioning_gate(covariance, threshold: float = CONDITION_LIMIT) -> GateResult:
    kappa = condition_number(covariance)
    return GateResult(kappa <= threshold, kappa)


def _window_columns(panel: ReturnPanel, asof: MonthStamp, window_years: int) -> np.ndarray:
    return panel.window(asof - 12 * window_years, asof)


def expected_returns(returns: ReturnPanel, asof: MonthStamp, window_years: int = 5) -> np.ndarray:
    """Mean monthly return over the ``window_years`` years strictly before ``asof``."""
    cols = _window_columns(returns, asof, window_years)
    need = 12 * window_years
    have = len(np.unique(returns.months[cols]))
    if have < need:
        raise InsufficientHistory(
            f"{have} of {need} months available before {asof}", firm=returns.firm_ids[0] if returns.firm_ids else None
        )
    return returns.returns[:, cols].mean(axis=1)


def ledoit_wolf_constant_correlation(x, intensity: float | None = None):
    """Shrink the sample covariance of ``x`` (T x N) toward the constant-correlation target.

    Returns ``(shrunk, sample, target, intensity)``. The sample covariance uses
    the 1/T normalization of the original estimator. ``intensity`` overrides
    the estimated optimal weight on the target.
    """
    x = np.asarray(x, dtype=float)
    t, n = x.shape
    xc = x - x.mean(axis=0)
    sample = xc.T @ xc / t
    var = np.diag(sample)
    sd = np.sqrt(var)
    if n > 1:
        outer = np.outer(sd, sd)
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = np.where(outer > 0, sample / outer, 0.0)
        rbar = (corr.sum() - np.trace(corr)) / (n * (n - 1))
        target = rbar * outer
        np.fill_diagonal(target, var)
    else:
        rbar = 0.0
        target = sample.copy()

    if intensity is None:
        y = xc * xc
        pi_mat = y.T @ y / t - sample**2
        pi_hat = pi_mat.sum()
        theta = (xc**3).T @ xc / t - var[:, None] * sample
        np.fill_diagonal(theta, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(sd[:, None] > 0, sd[None, :] / sd[:, None], 0.0)
        rho_hat = np.trace(pi_mat) + rbar * np.sum(ratio * theta)
        gamma_hat = np.sum((sample - target) ** 2)
        intensity = 0.0 if gamma_hat <= 0 else float(np.clip((pi_hat - rho_hat) / gamma_hat / t, 0.0, 1.0))
    shrunk = intensity * target + (1.0 - intensity) * sample
    return shrunk, sample, target, float(intensity)


def _clean(matrix: np.ndarray) -> np.ndarray:
    m = 0.5 * (matrix + matrix.T)
    eig, vec = np.linalg.eigh(m)
    if eig[0] < 0 and eig[0] >= -EIGEN_CLIP:
        eig = np.maximum(eig, 0.0)
        m = (vec * eig) @ vec.T
        m = 0.5 * (m + m.T)
    return m


def shrunk_covariance(
    returns: ReturnPanel,
    asof: MonthStamp,
    window_years: int = 5,
    periods_per_month: float = 21,
    intensity: float | None = None,
) -> CovarianceEstimate:
    """Shrunk covariance of the window's returns, scaled by ``periods_per_month``."""
    cols = _window_columns(returns, asof, window_years)
    x = returns.returns[:, cols].T
    if x.shape[0] < 2:
        raise InsufficientHistory(f"{x.shape[0]} observations before {asof}; need >= 2")
    if not np.all(np.isfinite(x)):
        raise ParseError("non-finite return in estimation window")
    shrunk, sample, _, delta = ledoit_wolf_constant_correlation(x, intensity)
    cov = _clean(shrunk * periods_per_month)
    return CovarianceEstimate(cov, delta, condition_number(cov), condition_number(sample), x.shape[0])


def estimate_inputs(
    monthly: ReturnPanel,
    asof: MonthStamp,
    daily: ReturnPanel | None = None,
    window_years: int = 5,
    periods_per_month: float = 21,
) -> FinancialInputs:
    """Expected returns from monthly data; covariance from daily data when given, else monthly."""
    mu = expected_returns(monthly, asof, window_years)
    if daily is not None:
        est = shrunk_covariance(daily, asof, window_years, periods_per_month)
    else:
        est = shrunk_covariance(monthly, asof, window_years, 1)
    return FinancialInputs(mu, est.covariance, est.condition_number, est.shrinkage_intensity, monthly.firm_ids, asof)
