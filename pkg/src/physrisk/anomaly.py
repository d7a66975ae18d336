"""Standardized temperature anomalies, extreme-event flags and their logistic trend model."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .data import MonthStamp, RegionId, TemperaturePanel
from .errors import DegenerateBaseline, InsufficientBaseline, SeparationError, SingleClassError

DEFAULT_THRESHOLD = 2.0
IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100
SEPARATION_LIMIT = 30.0


@dataclass(frozen=True)
class BaselineStats:
    region: RegionId
    month_of_year: int
    mean: float
    std: float
    window: tuple[int, int]


@dataclass(frozen=True)
class AnomalyPanel:
    regions: tuple[RegionId, ...]
    months: tuple[MonthStamp, ...]
    z: np.ndarray
    b: np.ndarray
    threshold: float = DEFAULT_THRESHOLD


@dataclass(frozen=True)
class LogisticEventModel:
    """Quadratic-trend logistic model for one region.

    Coefficients are in rescaled time ``s = t / time_scale`` where ``t`` counts
    months from ``time_origin``.
    """

    region: RegionId
    beta0: float
    beta1: float
    beta2: float
    time_origin: MonthStamp
    time_scale: float = 1.0
    std_errors: tuple[float, float, float] = (np.nan, np.nan, np.nan)
    n_iter: int = 0

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.beta0, self.beta1, self.beta2])

    def counter(self, month: MonthStamp) -> int:
        return month.ordinal - self.time_origin.ordinal


@dataclass(frozen=True)
class ClassifierScores:
    auroc: float
    aupr: float
    aupr_random: float


def _baseline_arrays(panel: TemperaturePanel, window: tuple[int, int]):
    lo, hi = window
    years = np.array([m.year for m in panel.months])
    moy = panel.month_of_year
    in_window = (years >= lo) & (years <= hi)
    means = np.empty((len(panel.regions), 12))
    stds = np.empty_like(means)
    for m in range(1, 13):
        cols = in_window & (moy == m)
        if cols.sum() < 2:
            raise InsufficientBaseline(
                f"month {m}: {int(cols.sum())} observations in baseline {lo}-{hi}, need >= 2"
            )
        vals = panel.values[:, cols]
        means[:, m - 1] = vals.mean(axis=1)
        stds[:, m - 1] = vals.std(axis=1, ddof=1)
    return means, stds


def fit_baseline(panel: TemperaturePanel, window: tuple[int, int] = (1960, 1990)) -> list[BaselineStats]:
    """Month-of-year mean and sample standard deviation over an inclusive year window."""
    means, stds = _baseline_arrays(panel, window)
    out = []
    for region in panel.regions:
        for m in range(12):
            if not stds[region.index, m] > 0:
                raise DegenerateBaseline(f"region {region.name}, month {m + 1}: zero standard deviation")
            out.append(BaselineStats(region, m + 1, float(means[region.index, m]), float(stds[region.index, m]), tuple(window)))
    return out


def _stats_matrices(baseline, k: int) -> tuple[np.ndarray, np.ndarray]:
    mu = np.full((k, 12), np.nan)
    sd = np.full((k, 12), np.nan)
    for s in baseline:
        mu[s.region.index, s.month_of_year - 1] = s.mean
        sd[s.region.index, s.month_of_year - 1] = s.std
    if np.isnan(mu).any():
        raise InsufficientBaseline("baseline does not cover every (region, month) pair")
    return mu, sd


def standardize(panel: TemperaturePanel, baseline) -> np.ndarray:
    mu, sd = _stats_matrices(baseline, len(panel.regions))
    idx = panel.month_of_year - 1
    return (panel.values - mu[:, idx]) / sd[:, idx]


def flag_extremes(z, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    return (np.asarray(z) > threshold).astype(np.int8)


def build_anomaly_panel(
    panel: TemperaturePanel, window: tuple[int, int] = (1960, 1990), threshold: float = DEFAULT_THRESHOLD
) -> AnomalyPanel:
    z = standardize(panel, fit_baseline(panel, window))
    return AnomalyPanel(panel.regions, panel.months, z, flag_extremes(z, threshold), threshold)


def _design(s: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones_like(s), s, s * s])


def fit_logistic(
    b,
    time_index=None,
    *,
    region: RegionId | None = None,
    time_origin: MonthStamp | None = None,
    time_scale: float | None = None,
) -> LogisticEventModel:
    """Maximum-likelihood quadratic-trend logistic fit by IRLS.

    ``time_index`` defaults to ``0..T-1``. Time is divided by ``time_scale``
    (default: the largest counter) so the covariates live on ``[0, 1]``.
    """
    y = np.asarray(b, dtype=float)
    t = np.arange(y.size, dtype=float) if time_index is None else np.asarray(time_index, dtype=float)
    if y.min() == y.max():
        raise SingleClassError("indicator series contains a single class")
    if time_scale is None:
        time_scale = float(t.max()) if t.max() > 0 else 1.0
    X = _design(t / time_scale)

    beta = np.zeros(3)
    for it in range(1, IRLS_MAX_ITER + 1):
        eta = X @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = p * (1.0 - p)
        H = X.T @ (X * w[:, None])
        g = X.T @ (y - p)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            raise SeparationError("information matrix became singular; data look separable") from None
        beta = beta + step
        if not np.all(np.isfinite(beta)) or np.max(np.abs(beta)) > SEPARATION_LIMIT:
            raise SeparationError(f"coefficients diverging ({beta}); perfect separation suspected")
        if np.max(np.abs(step)) < IRLS_TOL:
            break

    p = 1.0 / (1.0 + np.exp(-(X @ beta)))
    cov = np.linalg.inv(X.T @ (X * (p * (1 - p))[:, None]))
    se = np.sqrt(np.diag(cov))
    return LogisticEventModel(
        region=region if region is not None else RegionId("region", 0),
        beta0=float(beta[0]),
        beta1=float(beta[1]),
        beta2=float(beta[2]),
        time_origin=time_origin if time_origin is not None else MonthStamp(1970, 1),
        time_scale=float(time_scale),
        std_errors=tuple(float(v) for v in se),
        n_iter=it,
    )


def predict_probability(model: LogisticEventModel, t):
    """Event probability at month counter(s) ``t`` measured from the model's origin."""
    s = np.asarray(t, dtype=float) / model.time_scale
    eta = model.beta0 + model.beta1 * s + model.beta2 * s * s
    # logistic via tanh keeps the result strictly inside (0, 1) for moderate eta
    p = 0.5 * (1.0 + np.tanh(0.5 * eta))
    p = np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return float(p) if np.ndim(p) == 0 else p


def predict_at(model: LogisticEventModel, month: MonthStamp) -> float:
    return predict_probability(model, model.counter(month))


def fit_region_models(anomalies: AnomalyPanel, train_end: MonthStamp | None = None) -> list[LogisticEventModel]:
    """One logistic model per region, trained from the first month through ``train_end``."""
    origin = anomalies.months[0]
    last = len(anomalies.months) if train_end is None else train_end.ordinal - origin.ordinal + 1
    last = max(1, min(last, len(anomalies.months)))
    t = np.arange(last)
    scale = float(max(last - 1, 1))
    return [
        fit_logistic(anomalies.b[r.index, :last], t, region=r, time_origin=origin, time_scale=scale)
        for r in anomalies.regions
    ]


def evaluate_classifier(probabilities, labels) -> ClassifierScores:
    """AUROC (Mann-Whitney, ties count one half) and step-interpolated AUPR."""
    scores = np.asarray(probabilities, dtype=float)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("labels contain a single class")

    ranks = rankdata(scores)  # average ranks -> ties count 1/2
    auroc = (ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    order = np.argsort(-scores, kind="mergesort")
    s_sorted, y_sorted = scores[order], y[order]
    # one operating point per distinct threshold
    last_of_group = np.r_[np.nonzero(np.diff(s_sorted))[0], y.size - 1]
    tp = np.cumsum(y_sorted)[last_of_group]
    fp = (last_of_group + 1) - tp
    precision = tp / (tp + fp)
    recall = tp / n_pos
    aupr = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    return ClassifierScores(float(auroc), aupr, n_pos / y.size)
