"""Cross-region dependence of event indicators and pairwise admissibility bounds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anomaly import LogisticEventModel, predict_probability
from .data import MonthStamp
from .errors import DegenerateMarginal, ZeroVarianceSeries

ADMISSIBILITY_TOL = 1e-12


@dataclass(frozen=True)
class CorrelationBounds:
    rho_min: np.ndarray  # K x K
    rho_max: np.ndarray  # K x K
    mean_probabilities: np.ndarray  # K


@dataclass(frozen=True)
class Violation:
    i: int
    j: int
    rho: float
    rho_min: float
    rho_max: float


def pearson_binary(b, region_names=None) -> np.ndarray:
    """Pearson correlation matrix of the rows of a K x T indicator matrix."""
    b = np.asarray(b, dtype=float)
    sd = b.std(axis=1)
    for k in np.nonzero(sd == 0)[0]:
        raise ZeroVarianceSeries(region_names[k] if region_names is not None else int(k))
    corr = np.corrcoef(b)
    corr = np.atleast_2d(corr)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def mean_probability(model: LogisticEventModel, horizon) -> float:
    """Average fitted probability over a horizon.

    ``horizon`` is either a ``(start, end)`` pair of MonthStamps (inclusive)
    or an array of month counters relative to the model origin.
    """
    if isinstance(horizon, tuple) and len(horizon) == 2 and isinstance(horizon[0], MonthStamp):
        start, end = horizon
        counters = np.arange(model.counter(start), model.counter(end) + 1)
    else:
        counters = np.atleast_1d(np.asarray(horizon, dtype=float))
    if counters.size == 0:
        raise ValueError("empty horizon")
    return float(np.mean(predict_probability(model, counters)))


def frechet_bounds(p1, p2):
    """Attainable (rho_min, rho_max) for two Bernoulli variables with success probabilities p1, p2.

    Vectorized: array inputs broadcast and return arrays.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if np.any((p1 <= 0) | (p1 >= 1) | (p2 <= 0) | (p2 >= 1)):
        raise DegenerateMarginal("marginal probabilities must lie strictly inside (0, 1)")
    denom = np.sqrt(p1 * (1 - p1)) * np.sqrt(p2 * (1 - p2))
    prod = p1 * p2
    rho_max = (np.minimum(p1, p2) - prod) / denom
    rho_min = (np.maximum(0.0, p1 + p2 - 1.0) - prod) / denom
    if rho_max.ndim == 0:
        return float(rho_min), float(rho_max)
    return rho_min, rho_max


def correlation_bounds(mean_probabilities) -> CorrelationBounds:
    p = np.asarray(mean_probabilities, dtype=float)
    lo, hi = frechet_bounds(p[:, None], p[None, :])
    lo, hi = np.atleast_2d(lo).copy(), np.atleast_2d(hi).copy()
    np.fill_diagonal(lo, 1.0)
    np.fill_diagonal(hi, 1.0)
    return CorrelationBounds(lo, hi, p)


def moving_bounds(p1_series, p2_series):
    """Per-period bounds from time-varying probabilities; diagnostic only."""
    return frechet_bounds(np.asarray(p1_series), np.asarray(p2_series))


def check_admissibility(corr, bounds: CorrelationBounds, tol: float = ADMISSIBILITY_TOL) -> list[Violation]:
    corr = np.asarray(corr, dtype=float)
    if corr.shape != bounds.rho_max.shape:
        raise ValueError("correlation matrix and bounds cover different region sets")
    out = []
    k = corr.shape[0]
    for i in range(k):
        for j in range(i + 1, k):
            rho, lo, hi = corr[i, j], bounds.rho_min[i, j], bounds.rho_max[i, j]
            if rho < lo - tol or rho > hi + tol:
                out.append(Violation(i, j, float(rho), float(lo), float(hi)))
    return out
