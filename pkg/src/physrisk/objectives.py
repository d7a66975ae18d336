"""Portfolio objective vectors evaluated over a whole swarm at once."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .climate import climate_weights, cev, cre


@dataclass(frozen=True)
class PortfolioObjectives:
    """``w -> (-w.mu, w' Sigma w, climate)`` for a ``(P, N)`` batch of weights.

    ``climate`` selects the third objective: ``"cev"`` (default), ``"cre"``,
    or ``"none"`` for a mean-variance run with the third column fixed at 0.
    Instances are picklable so sweeps can run in worker processes.
    """

    mu: np.ndarray
    covariance: np.ndarray
    exposure: np.ndarray | None = None  # N x K
    probabilities: np.ndarray | None = None  # K
    correlations: np.ndarray | None = None  # K x K
    climate: str = "cev"

    def __post_init__(self):
        if self.climate not in ("cev", "cre", "none"):
            raise ValueError(f"unknown climate objective {self.climate!r}")
        if self.climate != "none" and (self.exposure is None or self.probabilities is None):
            raise ValueError("climate objectives need an exposure matrix and probabilities")
        if self.climate == "cev" and self.correlations is None:
            raise ValueError("CEV needs a correlation matrix")

    @property
    def n_assets(self) -> int:
        return len(self.mu)

    def __call__(self, W) -> np.ndarray:
        W = np.atleast_2d(np.asarray(W, dtype=float))
        f1 = -(W @ self.mu)
        f2 = np.einsum("pi,pi->p", W @ self.covariance, W)
        if self.climate == "none":
            f3 = np.zeros(W.shape[0])
        else:
            alphas = climate_weights(W, self.exposure)
            if self.climate == "cev":
                f3 = cev(alphas, self.probabilities, self.correlations)
            else:
                f3 = cre(alphas, self.probabilities)
        return np.column_stack([f1, f2, f3])
