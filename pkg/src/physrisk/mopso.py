"""Multi-objective particle swarm with an external repository and adaptive grid.

Positions live on the capped simplex ``{w : lb <= w_i <= ub, sum w = 1}``.
All objectives are minimized. One iteration updates the whole swarm against
the repository as it stood at the start of the iteration, so the swarm is
moved and evaluated as a batch; the repository is then extended, filtered for
dominance, re-gridded and pruned back to ``n_rep`` members.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ObjectiveEvaluationError

DEDUP_DECIMALS = 12


@dataclass(frozen=True)
class MopsoConfig:
    n_pop: int = 500
    iter: int = 300
    n_rep: int = 400
    n_grid: int = 10
    alpha: float = 0.1
    beta: float = 1.0
    gamma: float = 1.0
    mu: float = 2.0
    omega: float = 0.8
    c1: float = 1.5
    c2: float = 1.5
    lb: float = 0.0
    ub: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_pop", "iter", "n_rep", "n_grid"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.omega <= 1:
            raise ValueError("omega must lie in [0, 1]")
        if self.lb > self.ub:
            raise ValueError("lb must not exceed ub")
        if self.mu <= 0:
            raise ValueError("mu must be positive")

    def replace(self, **changes) -> "MopsoConfig":
        return MopsoConfig(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MopsoConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown MOPSO parameters: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "MopsoConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Grid:
    lower: np.ndarray
    upper: np.ndarray
    n_grid: int

    def edges(self, dim: int) -> np.ndarray:
        return self.lower[dim] + (self.upper[dim] - self.lower[dim]) * np.arange(self.n_grid + 1) / self.n_grid

    def locate(self, objectives) -> np.ndarray:
        """Cell index per dimension; cells are half-open so boundary points go to the higher cell."""
        F = np.atleast_2d(np.asarray(objectives, dtype=float))
        cells = np.zeros(F.shape, dtype=np.int64)
        for d in range(F.shape[1]):
            if self.upper[d] <= self.lower[d]:
                continue  # degenerate dimension: one cell
            idx = np.searchsorted(self.edges(d), F[:, d], side="right") - 1
            cells[:, d] = np.clip(idx, 0, self.n_grid - 1)
        return cells

    def flat(self, cells: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(cells.T, (self.n_grid,) * cells.shape[1])


@dataclass
class ParetoArchive:
    positions: np.ndarray
    objectives: np.ndarray
    grid: Grid
    cells: np.ndarray
    n_evaluations: int = 0

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def cell_ids(self) -> np.ndarray:
        return self.grid.flat(self.cells)


# ------------------------------------------------------------------ primitives


def dominates(a, b) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(a <= b) and np.any(a < b))


def dominates_rows(A, B) -> np.ndarray:
    """Row-wise ``A[i]`` dominates ``B[i]``."""
    return np.all(A <= B, axis=1) & np.any(A < B, axis=1)


def nondominated_mask(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    n, m = F.shape
    le = np.ones((n, n), dtype=bool)
    lt = np.zeros((n, n), dtype=bool)
    for d in range(m):
        col = F[:, d]
        le &= col[:, None] <= col[None, :]
        lt |= col[:, None] < col[None, :]
    dominated = (le & lt).any(axis=0)
    return ~dominated


def repair_simplex(raw, lb: float = 0.0, ub: float = 1.0) -> np.ndarray:
    """Clip to ``[lb, ub]`` and rescale to unit sum; an all-zero row becomes uniform."""
    x = np.clip(np.asarray(raw, dtype=float), lb, ub)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    s = x.sum(axis=1, keepdims=True)
    zero = s[:, 0] <= 0
    out = np.empty_like(x)
    out[~zero] = x[~zero] / s[~zero]
    out[zero] = 1.0 / x.shape[1]
    return out[0] if single else out


def velocity_update(velocity, position, leader, pbest_position, cfg: MopsoConfig, rng) -> np.ndarray:
    """Inertia plus attraction to the repository leader and the personal best.

    One pair of uniform scalars is drawn per particle.
    """
    v = np.atleast_2d(velocity)
    r1 = rng.random((v.shape[0], 1))
    r2 = rng.random((v.shape[0], 1))
    new = cfg.omega * v + cfg.c1 * r1 * (leader - position) + cfg.c2 * r2 * (pbest_position - position)
    return new[0] if np.ndim(velocity) == 1 else new


def mutation_probability(t: int, iter: int, mu: float) -> float:
    if iter < 2:
        return 1.0
    return float((1.0 - t / (iter - 1)) ** (1.0 / mu))


def mutate(position, pm: float, rng, lb: float = 0.0, ub: float = 1.0) -> np.ndarray:
    """Redraw one random coordinate uniformly within a window of width ``pm*(ub-lb)``.

    The window is centred on the current value and truncated to ``[lb, ub]``;
    the result is repaired back onto the simplex. Accepts one position or a
    batch (one coordinate mutated per row).
    """
    x = np.array(np.atleast_2d(position), dtype=float)
    rows = np.arange(x.shape[0])
    j = rng.integers(0, x.shape[1], size=x.shape[0])
    half = 0.5 * pm * (ub - lb)
    cur = x[rows, j]
    low = np.maximum(lb, cur - half)
    high = np.minimum(ub, cur + half)
    x[rows, j] = low + (high - low) * rng.random(x.shape[0])
    out = repair_simplex(x, lb, ub)
    return out[0] if np.ndim(position) == 1 else out


def grid_build(objectives, n_grid: int, alpha: float) -> tuple[Grid, np.ndarray]:
    """Equal-width cells over ``[min - dc, max + dc]`` per objective with ``dc = (max - min) * alpha``."""
    F = np.atleast_2d(np.asarray(objectives, dtype=float))
    smin, smax = F.min(axis=0), F.max(axis=0)
    dc = (smax - smin) * alpha
    grid = Grid(smin - dc, smax + dc, int(n_grid))
    return grid, grid.locate(F)


def _cell_groups(cell_ids: np.ndarray):
    order = np.argsort(cell_ids, kind="stable")
    uniq, start, counts = np.unique(cell_ids[order], return_index=True, return_counts=True)
    return order, uniq, start, counts


def select_leader(cell_ids, beta: float, rng, size: int | None = None):
    """Roulette over occupied cells with weight ``count**-beta``, then a uniform member."""
    cell_ids = np.asarray(cell_ids)
    order, _, start, counts = _cell_groups(cell_ids)
    w = counts.astype(float) ** (-beta)
    n = 1 if size is None else size
    chosen = rng.choice(counts.size, size=n, p=w / w.sum())
    offset = np.floor(rng.random(n) * counts[chosen]).astype(np.int64)
    picks = order[start[chosen] + offset]
    return int(picks[0]) if size is None else picks


def select_deletion(cell_ids, gamma: float, rng) -> int:
    """Roulette over occupied cells with weight ``count**gamma``, then a uniform member."""
    cell_ids = np.asarray(cell_ids)
    order, _, start, counts = _cell_groups(cell_ids)
    w = counts.astype(float) ** gamma
    c = rng.choice(counts.size, p=w / w.sum())
    return int(order[start[c] + int(rng.random() * counts[c])])


def prune(cell_ids, n_rep: int, gamma: float, rng) -> np.ndarray:
    """Indices kept after deleting members one at a time until ``n_rep`` remain."""
    cell_ids = np.asarray(cell_ids)
    if cell_ids.size <= n_rep:
        return np.arange(cell_ids.size)
    order, _, start, counts = _cell_groups(cell_ids)
    members = [list(order[s : s + c]) for s, c in zip(start, counts)]
    counts = counts.astype(float)
    alive = np.ones(cell_ids.size, dtype=bool)
    remaining = cell_ids.size
    while remaining > n_rep:
        w = np.where(counts > 0, counts, 0.0) ** gamma
        w[counts == 0] = 0.0
        c = rng.choice(counts.size, p=w / w.sum())
        victim = members[c].pop(int(rng.random() * counts[c]))
        counts[c] -= 1
        alive[victim] = False
        remaining -= 1
    return np.nonzero(alive)[0]


# --------------------------------------------------------------------- driver


def _evaluate(objectives: Callable, positions: np.ndarray) -> np.ndarray:
    F = np.asarray(objectives(positions), dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] != positions.shape[0]:
        raise ValueError("objective function returned the wrong number of rows")
    bad = ~np.all(np.isfinite(F), axis=1)
    if bad.any():
        raise ObjectiveEvaluationError(positions[bad])
    return F


def _unique_rows(positions: np.ndarray) -> np.ndarray:
    _, first = np.unique(np.round(positions, DEDUP_DECIMALS), axis=0, return_index=True)
    return np.sort(first)


def update_repository(rep_pos, rep_obj, pos, objs):
    """Merge, drop near-duplicate positions and keep the non-dominated members."""
    P = np.vstack([rep_pos, pos])
    F = np.vstack([rep_obj, objs])
    nd = nondominated_mask(F)
    P, F = P[nd], F[nd]
    keep = _unique_rows(P)
    return P[keep], F[keep]


def run_mopso(
    objectives: Callable[[np.ndarray], np.ndarray],
    n_assets: int,
    cfg: MopsoConfig = MopsoConfig(),
    *,
    mutation: bool = True,
    callback: Callable[[int, ParetoArchive], None] | None = None,
) -> ParetoArchive:
    """Run the swarm and return the final repository.

    ``objectives`` maps a ``(P, n_assets)`` batch of weight vectors to a
    ``(P, M)`` array of objective values. The run is a deterministic function
    of its inputs and ``cfg.seed``.
    """
    rng = np.random.default_rng(cfg.seed)
    lb, ub = cfg.lb, cfg.ub

    pos = repair_simplex(rng.exponential(size=(cfg.n_pop, n_assets)), lb, ub)
    vel = np.zeros_like(pos)
    objs = _evaluate(objectives, pos)
    n_eval = cfg.n_pop
    pbest_pos, pbest_obj = pos.copy(), objs.copy()

    rep_pos, rep_obj = update_repository(pos[:0], objs[:0], pos, objs)
    grid, cells = grid_build(rep_obj, cfg.n_grid, cfg.alpha)

    for t in range(cfg.iter):
        pm = mutation_probability(t, cfg.iter, cfg.mu)

        leaders = rep_pos[select_leader(grid.flat(cells), cfg.beta, rng, cfg.n_pop)]
        vel = velocity_update(vel, pos, leaders, pbest_pos, cfg, rng)
        pos = repair_simplex(pos + vel, lb, ub)
        objs = _evaluate(objectives, pos)
        n_eval += cfg.n_pop

        if mutation:
            hit = np.nonzero(rng.random(cfg.n_pop) < pm)[0]
            if hit.size:
                new_pos = mutate(pos[hit], pm, rng, lb, ub)
                new_obj = _evaluate(objectives, new_pos)
                n_eval += hit.size
                old_obj = objs[hit]
                coin = rng.random(hit.size) < 0.5
                accept = dominates_rows(new_obj, old_obj) | (~dominates_rows(old_obj, new_obj) & coin)
                pos[hit[accept]] = new_pos[accept]
                objs[hit[accept]] = new_obj[accept]

        coin = rng.random(cfg.n_pop) < 0.5
        better = dominates_rows(objs, pbest_obj) | (~dominates_rows(pbest_obj, objs) & coin)
        pbest_pos[better] = pos[better]
        pbest_obj[better] = objs[better]

        rep_pos, rep_obj = update_repository(rep_pos, rep_obj, pos, objs)
        grid, cells = grid_build(rep_obj, cfg.n_grid, cfg.alpha)
        if len(rep_pos) > cfg.n_rep:
            keep = prune(grid.flat(cells), cfg.n_rep, cfg.gamma, rng)
            rep_pos, rep_obj, cells = rep_pos[keep], rep_obj[keep], cells[keep]

        if callback is not None:
            callback(t, ParetoArchive(rep_pos, rep_obj, grid, cells, n_eval))

    return ParetoArchive(rep_pos, rep_obj, grid, cells, n_eval)
