"""Front quality indicators, composition distances and scalarized selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ReferencePointError, TooFewPoints

ACTIVE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class FrontMetrics:
    hypervolume: float
    spacing: float
    reference_point: np.ndarray


@dataclass(frozen=True)
class ScalarizationWeights:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if min(self.a, self.b, self.c) < 0 or abs(self.a + self.b + self.c - 1.0) > 1e-9:
            raise ValueError(f"scalarization weights must be non-negative and sum to 1: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])


STRATEGY_WEIGHTS = {
    "balanced": ScalarizationWeights(1 / 3, 1 / 3, 1 / 3),
    "minimum-risk": ScalarizationWeights(0.0, 0.5, 0.5),
    "return-oriented": ScalarizationWeights(0.5, 0.25, 0.25),
    "variance-oriented": ScalarizationWeights(0.25, 0.5, 0.25),
    "climate-oriented": ScalarizationWeights(0.25, 0.25, 0.5),
    "mean-variance": ScalarizationWeights(0.5, 0.5, 0.0),
}


# ----------------------------------------------------------------- hypervolume


def _hv2d(points: np.ndarray, ref: np.ndarray) -> float:
    order = np.lexsort((points[:, 1], points[:, 0]))
    area, best_y = 0.0, ref[1]
    for x, y in points[order]:
        if y < best_y:
            area += (ref[0] - x) * (best_y - y)
            best_y = y
    return area


def _hv(points: np.ndarray, ref: np.ndarray) -> float:
    m = points.shape[1]
    if m == 1:
        return float(ref[0] - points[:, 0].min())
    if m == 2:
        return _hv2d(points, ref)
    # slice along the last objective
    order = np.argsort(points[:, -1], kind="stable")
    pts = points[order]
    levels = np.r_[pts[:, -1], ref[-1]]
    total = 0.0
    for i in range(len(pts)):
        depth = levels[i + 1] - levels[i]
        if depth > 0:
            total += _hv(pts[: i + 1, :-1], ref[:-1]) * depth
    return total


def hypervolume(front, reference) -> float:
    """Exact dominated volume (minimization) by recursive slicing."""
    F = np.atleast_2d(np.asarray(front, dtype=float))
    ref = np.asarray(reference, dtype=float)
    if F.shape[1] != ref.size:
        raise ValueError("front and reference differ in dimension")
    if F.shape[0] == 0:
        return 0.0
    if not np.all(F < ref):
        raise ReferencePointError("every front point must be strictly better than the reference point")
    from .mopso import nondominated_mask

    F = np.unique(F[nondominated_mask(F)], axis=0)
    return float(_hv(F, ref))


def default_reference(front, margin: float = 0.1) -> np.ndarray:
    """Per-objective maximum plus ``margin`` times the objective range.

    A zero-range objective is offset by ``margin * max(|max|, 1)``.
    """
    F = np.atleast_2d(np.asarray(front, dtype=float))
    hi, lo = F.max(axis=0), F.min(axis=0)
    span = hi - lo
    span = np.where(span > 0, span, np.maximum(np.abs(hi), 1.0))
    return hi + margin * span


# ------------------------------------------------------------------ spacing


def spacing(front) -> float:
    """Sample standard deviation of each point's distance to its nearest distinct neighbour."""
    F = np.atleast_2d(np.asarray(front, dtype=float))
    if F.shape[0] < 2:
        raise TooFewPoints("spacing needs at least two points")
    d = np.sqrt(((F[:, None, :] - F[None, :, :]) ** 2).sum(axis=-1))
    d[d == 0] = np.inf
    nearest = d.min(axis=1)
    if not np.all(np.isfinite(nearest)):
        raise TooFewPoints("spacing needs at least two distinct points")
    return float(np.std(nearest, ddof=1))


def front_metrics(front, reference=None) -> FrontMetrics:
    ref = default_reference(front) if reference is None else np.asarray(reference, dtype=float)
    return FrontMetrics(hypervolume(front, ref), spacing(front), ref)


# -------------------------------------------------------------- composition


def jaccard_distance(x, y) -> float:
    """Continuous Jaccard distance ``1 - sum(min)/sum(max)`` between non-negative weight vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("weight vectors differ in length")
    top = np.maximum(x, y).sum()
    if top == 0:
        return 0.0
    return float(1.0 - np.minimum(x, y).sum() / top)


def distance_heatmap(positions, variances=None) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise Jaccard distances with portfolios ordered by ascending variance.

    Returns ``(matrix, order)`` where ``order`` maps rows back to the input.
    """
    W = np.atleast_2d(np.asarray(positions, dtype=float))
    order = np.arange(len(W)) if variances is None else np.argsort(np.asarray(variances), kind="stable")
    W = W[order]
    mins = np.minimum(W[:, None, :], W[None, :, :]).sum(axis=-1)
    maxs = np.maximum(W[:, None, :], W[None, :, :]).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        D = np.where(maxs > 0, 1.0 - mins / maxs, 0.0)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D, order


def active_positions(w, threshold: float = ACTIVE_THRESHOLD) -> int:
    return int(np.sum(np.asarray(w) > threshold))


# ------------------------------------------------------------------ slicing


@dataclass(frozen=True)
class VarianceSlice:
    lower: float
    upper: float
    members: np.ndarray
    climate: np.ndarray  # f3 of members
    expected_return: np.ndarray  # -f1 of members
    quadratic_fit: np.ndarray | None  # return ~ c2*x^2 + c1*x + c0, None with < 3 distinct x


def slice_by_variance(objectives, n_bins: int) -> list[VarianceSlice]:
    """Equal-width variance bins; the last bin is closed on the right."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    F = np.atleast_2d(np.asarray(objectives, dtype=float))
    f2 = F[:, 1]
    lo, hi = f2.min(), f2.max()
    edges = lo + (hi - lo) * np.arange(n_bins + 1) / n_bins
    if hi > lo:
        idx = np.clip(np.searchsorted(edges, f2, side="right") - 1, 0, n_bins - 1)
    else:
        idx = np.zeros(f2.size, dtype=int)
    out = []
    for k in range(n_bins):
        members = np.nonzero(idx == k)[0]
        x, y = F[members, 2], -F[members, 0]
        fit = np.polyfit(x, y, 2) if np.unique(x).size >= 3 else None
        out.append(VarianceSlice(float(edges[k]), float(edges[k + 1]), members, x, y, fit))
    return out


# ------------------------------------------------------------ scalarization


def scalarize_select(objectives, weights: ScalarizationWeights) -> int:
    """Row minimizing the weighted min-max-normalized objectives; ties go to the lowest index."""
    F = np.atleast_2d(np.asarray(objectives, dtype=float))
    lo, hi = F.min(axis=0), F.max(axis=0)
    span = hi - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        norm = np.where(span > 0, (F - lo) / np.where(span > 0, span, 1.0), 0.0)
    score = norm @ weights.as_array()
    return int(np.argmin(score))
