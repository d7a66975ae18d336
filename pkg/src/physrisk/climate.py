"""Climate-normalized weights and the CRE / CEV exposure metrics.

Every function accepts either one portfolio (1-D weights) or a population
(P x N weights) so an optimizer can evaluate a whole swarm in one call.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import FirmProfile
from .dependence import CorrelationBounds
from .errors import ZeroClimateMass

SCENARIOS = ("empirical", "frechet_max", "frechet_min")


@dataclass(frozen=True)
class ClimateExposure:
    alphas: np.ndarray
    cre: float
    cev: float
    idiosyncratic_term: float
    systemic_term: float


def exposure_matrix(firms: Sequence[FirmProfile]) -> np.ndarray:
    """N x K matrix of AI_i * S_ik; independent of the portfolio."""
    m = np.array([f.asset_intensity * f.revenue_shares for f in firms], dtype=float)
    m.setflags(write=False)
    return m


def climate_weights(w, firms) -> np.ndarray:
    """Regional share of the portfolio's asset-intensity-weighted revenue."""
    E = firms if isinstance(firms, np.ndarray) else exposure_matrix(firms)
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != E.shape[0]:
        raise ValueError(f"{w.shape[-1]} weights for {E.shape[0]} firms")
    mass = w @ E
    total = mass.sum(axis=-1, keepdims=True)
    if np.any(~(total > 0)):
        raise ZeroClimateMass("portfolio carries no asset-intensity-weighted revenue")
    return mass / total


def cre(alphas, probabilities):
    return np.asarray(alphas, dtype=float) @ np.asarray(probabilities, dtype=float)


def cev_terms(alphas, probabilities, correlations):
    """(cev, idiosyncratic, systemic); scalars for 1-D alphas, arrays for 2-D."""
    a = np.asarray(alphas, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    c = np.array(correlations, dtype=float)
    scaled = a * np.sqrt(p * (1.0 - p))
    idio = np.sum(scaled * scaled, axis=-1)
    np.fill_diagonal(c, 0.0)
    systemic = np.sum((scaled @ c) * scaled, axis=-1)
    total = idio + systemic
    if np.ndim(total) == 0:
        return float(total), float(idio), float(systemic)
    return total, idio, systemic


def cev(alphas, probabilities, correlations):
    return cev_terms(alphas, probabilities, correlations)[0]


def climate_exposure(w, firms, probabilities, correlations) -> ClimateExposure:
    alphas = climate_weights(w, firms)
    total, idio, sys_ = cev_terms(alphas, probabilities, correlations)
    return ClimateExposure(alphas, float(cre(alphas, probabilities)), total, idio, sys_)


def uniform_limit_decomposition(K: int, p: float, rho: float) -> tuple[float, float]:
    """Closed-form (idiosyncratic, systemic) CEV terms for alpha_k = 1/K, constant p and rho."""
    if K < 1:
        raise ValueError("K must be >= 1")
    v = p * (1.0 - p)
    return v / K, (1.0 - 1.0 / K) * rho * v


def scenario_correlations(scenario: str, empirical, bounds: CorrelationBounds | None = None) -> np.ndarray:
    """Correlation matrix for a stress scenario; the diagonal is always 1."""
    aliases = {"max": "frechet_max", "min": "frechet_min"}
    scenario = aliases.get(scenario, scenario)
    if scenario == "empirical":
        c = np.array(empirical, dtype=float)
    elif scenario in ("frechet_max", "frechet_min"):
        if bounds is None:
            raise ValueError(f"scenario {scenario!r} needs correlation bounds")
        c = np.array(bounds.rho_max if scenario == "frechet_max" else bounds.rho_min, dtype=float)
    else:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    np.fill_diagonal(c, 1.0)
    return c


def stress_cev(alphas, probabilities, scenario: str, empirical, bounds: CorrelationBounds | None = None):
    return cev(alphas, probabilities, scenario_correlations(scenario, empirical, bounds))


def reference_alphas(kind: str, probabilities) -> np.ndarray:
    """Region-level reference allocations: ``equal`` or ``inverse_risk`` (alpha_k proportional to 1/p_k)."""
    p = np.asarray(probabilities, dtype=float)
    if kind == "equal":
        return np.full(p.shape, 1.0 / p.size)
    if kind == "inverse_risk":
        inv = 1.0 / p
        return inv / inv.sum()
    raise ValueError(f"unknown reference allocation {kind!r}")
