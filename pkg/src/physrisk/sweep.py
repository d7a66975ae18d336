"""Hyperparameter sweep harness: replicated swarm runs scored on a shared reference point."""
from __future__ import annotations

import csv
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .front import default_reference, hypervolume, spacing
from .mopso import MopsoConfig, run_mopso

SWEEP_COLUMNS = ("iter", "n_pop", "n_rep", "time", "hypervolume", "spacing")


@dataclass(frozen=True)
class SweepRun:
    iter: int
    n_pop: int
    n_rep: int
    replication: int
    seed: int
    seconds: float
    front: np.ndarray


@dataclass(frozen=True)
class SweepRow:
    iter: int
    n_pop: int
    n_rep: int
    time: float
    hypervolume: float
    spacing: float

    def as_tuple(self) -> tuple:
        return (self.iter, self.n_pop, self.n_rep, self.time, self.hypervolume, self.spacing)


def _one_run(objectives, n_assets: int, cfg: MopsoConfig, replication: int) -> SweepRun:
    t0 = time.perf_counter()
    archive = run_mopso(objectives, n_assets, cfg)
    elapsed = time.perf_counter() - t0
    return SweepRun(cfg.iter, cfg.n_pop, cfg.n_rep, replication, cfg.seed, elapsed, archive.objectives)


def expand_grid(grid: dict[str, Sequence[int]]) -> list[tuple[int, int, int]]:
    """Cells in row-major order over ``iter``, ``n_pop`` and ``n_rep``."""
    return list(itertools.product(grid["iter"], grid["n_pop"], grid["n_rep"]))


def sweep_runs(
    objectives: Callable,
    n_assets: int,
    grid: dict[str, Sequence[int]],
    replications: int = 10,
    base: MopsoConfig = MopsoConfig(),
    seed: int = 0,
    jobs: int = 1,
) -> list[SweepRun]:
    """Every (cell, replication) run; replication ``r`` uses seed ``seed + r``.

    The returned list is ordered by grid position then replication, whatever
    order the worker processes finish in.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    tasks = []
    for it, n_pop, n_rep in expand_grid(grid):
        for r in range(replications):
            cfg = base.replace(iter=int(it), n_pop=int(n_pop), n_rep=int(n_rep), seed=seed + r)
            tasks.append((cfg, r))
    if jobs <= 1:
        return [_one_run(objectives, n_assets, cfg, r) for cfg, r in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_one_run, objectives, n_assets, cfg, r) for cfg, r in tasks]
        return [f.result() for f in futures]


def summarize(runs: Sequence[SweepRun], reference=None) -> tuple[list[SweepRow], np.ndarray]:
    """Cell means of time, hypervolume and spacing with one reference point for all runs."""
    if reference is None:
        reference = default_reference(np.vstack([r.front for r in runs]))
    reference = np.asarray(reference, dtype=float)
    cells: dict[tuple[int, int, int], list[tuple[float, float, float]]] = {}
    for r in runs:
        sp = spacing(r.front) if len(r.front) >= 2 else float("nan")
        cells.setdefault((r.iter, r.n_pop, r.n_rep), []).append((r.seconds, hypervolume(r.front, reference), sp))
    rows = []
    for (it, n_pop, n_rep), vals in cells.items():
        v = np.array(vals)
        rows.append(SweepRow(it, n_pop, n_rep, *(float(x) for x in v.mean(axis=0))))
    return rows, reference


def sweep(
    objectives: Callable,
    n_assets: int,
    grid: dict[str, Sequence[int]],
    replications: int = 10,
    base: MopsoConfig = MopsoConfig(),
    seed: int = 0,
    jobs: int = 1,
    reference=None,
) -> list[SweepRow]:
    runs = sweep_runs(objectives, n_assets, grid, replications, base, seed, jobs)
    return summarize(runs, reference)[0]


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([row.iter, row.n_pop, row.n_rep, *(format(x, ".12g") for x in row.as_tuple()[3:])])
