"""Tri-objective frontier for a small synthetic universe.

Expected returns and a shrunk covariance are estimated on a five-year
window, event probabilities come from the per-region logistic curves, and
the particle swarm searches for portfolios that trade return against
variance and CEV. The resulting archive is summarized by hypervolume and
spacing, cut into variance slices, and the named scalarizations pick one
portfolio each.

    python demos/efficient_frontier.py [--firms 15] [--iter 120]
"""
import argparse
import time

import numpy as np

from physrisk.anomaly import build_anomaly_panel, fit_region_models, predict_at
from physrisk.climate import exposure_matrix
from physrisk.data import generate_synthetic_bundle
from physrisk.dependence import pearson_binary
from physrisk.estimation import estimate_inputs
from physrisk.front import STRATEGY_WEIGHTS, active_positions, front_metrics, scalarize_select, slice_by_variance
from physrisk.mopso import MopsoConfig, run_mopso
from physrisk.objectives import PortfolioObjectives


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--firms", type=int, default=15)
    ap.add_argument("--iter", type=int, default=120)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args(argv)

    bundle = generate_synthetic_bundle(args.seed, args.firms, 6, 1032, return_months=72)
    anomalies = build_anomaly_panel(bundle.temperatures)
    month = bundle.return_months[60]
    inputs = estimate_inputs(bundle.monthly_returns, month, bundle.daily_returns)
    models = fit_region_models(anomalies, train_end=month - 1)
    p = np.array([predict_at(m, month - 1) for m in models])
    print(f"optimizing {args.firms} assets for {month}; shrinkage intensity {inputs.shrinkage_intensity:.2f}")

    objective = PortfolioObjectives(
        inputs.expected_returns, inputs.covariance, exposure_matrix(bundle.firms), p, pearson_binary(anomalies.b)
    )
    cfg = MopsoConfig(n_pop=200, iter=args.iter, n_rep=200, seed=args.seed)
    t0 = time.perf_counter()
    archive = run_mopso(objective, args.firms, cfg)
    print(f"{len(archive)} non-dominated portfolios after {archive.n_evaluations} evaluations "
          f"({time.perf_counter() - t0:.1f}s)")

    F = archive.objectives
    m = front_metrics(F)
    print(f"hypervolume {m.hypervolume:.3e}, spacing {m.spacing:.3e}")

    print("\nvariance slice          members  mean CEV")
    for s in slice_by_variance(F, 4):
        if s.members.size:
            print(f"[{s.lower:.5f}, {s.upper:.5f}]  {s.members.size:7d}  {s.climate.mean():.5f}")

    print("\nstrategy             return   variance  CEV      active")
    for name, weights in STRATEGY_WEIGHTS.items():
        i = scalarize_select(F, weights)
        print(f"{name:<20} {-F[i, 0]:.4f}   {F[i, 1]:.5f}   {F[i, 2]:.5f}  {active_positions(archive.positions[i]):>4}")


if __name__ == "__main__":
    main()
