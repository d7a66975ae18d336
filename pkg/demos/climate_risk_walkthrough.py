"""From raw temperatures to a portfolio's climate exposure.

A synthetic six-region temperature history is standardized against its
1960-1990 baseline, months more than two deviations above normal are
flagged, and a quadratic-trend logistic curve is fitted per region. The
flags give an empirical correlation matrix whose entries are checked
against the attainable range for two Bernoulli variables. Finally the
climate weights, CRE and CEV of an equal-weight portfolio are reported
under the empirical and both extreme dependence scenarios.

    python demos/climate_risk_walkthrough.py
"""
import numpy as np

from physrisk.anomaly import build_anomaly_panel, evaluate_classifier, fit_region_models, predict_at, predict_probability
from physrisk.climate import climate_exposure, climate_weights, stress_cev, uniform_limit_decomposition
from physrisk.dependence import check_admissibility, correlation_bounds, mean_probability, pearson_binary
from physrisk.data import generate_synthetic_bundle


def main():
    bundle = generate_synthetic_bundle(seed=11, n_firms=8, k_regions=6, t_months=1032, return_months=72)
    panel = build_anomaly_panel(bundle.temperatures)
    last = panel.months[-1]
    print(f"{len(panel.regions)} regions, {len(panel.months)} months ending {last}")
    print(f"share of flagged months: {panel.b.mean():.3f}")

    models = fit_region_models(panel)
    print("\nregion          p(last)  AUROC  AUPR")
    for k, m in enumerate(models):
        t = np.arange(len(panel.months))
        scores = evaluate_classifier(predict_probability(m, t), panel.b[k])
        print(f"{m.region.name:<14} {predict_at(m, last):7.3f}  {scores.auroc:.3f}  {scores.aupr:.3f}")

    corr = pearson_binary(panel.b)
    horizon = (panel.months[-120], last)
    bounds = correlation_bounds([mean_probability(m, horizon) for m in models])
    problems = check_admissibility(corr, bounds)
    print(f"\nempirical correlations outside the attainable range: {len(problems)}")

    w = np.full(len(bundle.firms), 1 / len(bundle.firms))
    p = np.array([predict_at(m, last) for m in models])
    exposure = climate_exposure(w, bundle.firms, p, corr)
    print(f"\nequal-weight portfolio: CRE {exposure.cre:.4f}, CEV {exposure.cev:.5f}")
    print(f"  idiosyncratic {exposure.idiosyncratic_term:.5f} + systemic {exposure.systemic_term:.5f}")
    alphas = climate_weights(w, bundle.firms)
    for scenario in ("max", "min"):
        print(f"  CEV under {scenario} dependence: {stress_cev(alphas, p, scenario, corr, bounds):.5f}")

    # spreading exposure evenly kills the idiosyncratic term but not the systemic one
    print("\nK       idiosyncratic  systemic")
    for K in (1, 10, 100, 1000):
        idio, sys_ = uniform_limit_decomposition(K, 0.5, 0.4)
        print(f"{K:<7} {idio:.6f}       {sys_:.6f}")


if __name__ == "__main__":
    main()
