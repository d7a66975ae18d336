"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line through the ``verdict`` fixture;
the lines are repeated in the pytest terminal summary under
"acceptance criteria". Run with ``pytest tests/test_acceptance.py -v``.
"""
import math
import time

import numpy as np
import pytest

from physrisk.anomaly import build_anomaly_panel, evaluate_classifier, fit_logistic, fit_region_models, predict_at, predict_probability
from physrisk.backtest import (
    ALL_STRATEGIES,
    BacktestConfig,
    BacktestData,
    cagr,
    max_drawdown,
    run_backtest,
    sharpe,
    sortino,
)
from physrisk.climate import cev, cev_terms, cre, exposure_matrix, uniform_limit_decomposition
from physrisk.data import generate_synthetic_bundle
from physrisk.dependence import frechet_bounds, pearson_binary
from physrisk.errors import SeparationError
from physrisk.estimation import estimate_inputs
from physrisk.front import default_reference, hypervolume, jaccard_distance, spacing
from physrisk.mopso import MopsoConfig, run_mopso
from physrisk.objectives import PortfolioObjectives
from physrisk.regression import RegressionSpec, fit, newey_west_covariance, ols, panel_regression
from physrisk.sweep import summarize, sweep_runs

from .oracles import (
    box_sampling_hypervolume,
    brute_force_sandwich,
    induced_binary_correlation,
    mc_moments,
    random_latent_correlation,
    simulate_panel,
)


def synthetic_objectives(n_assets: int, seed: int, climate: str = "cev") -> PortfolioObjectives:
    """Objectives for a synthetic universe as the backtest would build them in its first month."""
    b = generate_synthetic_bundle(seed, n_assets, 6, 1032, return_months=72)
    anomalies = build_anomaly_panel(b.temperatures)
    month = b.return_months[60]
    inputs = estimate_inputs(b.monthly_returns, month, b.daily_returns)
    models = fit_region_models(anomalies, train_end=month - 1)
    p = np.array([predict_at(m, month - 1) for m in models])
    return PortfolioObjectives(
        inputs.expected_returns, inputs.covariance, exposure_matrix(b.firms), p, pearson_binary(anomalies.b), climate
    )


def pairwise_nondominated(F) -> bool:
    F = np.asarray(F)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return not np.any(le & lt)


# ---------------------------------------------------------------- criterion 1


def extremal_coupling_correlation(p1: float, p2: float, comonotone: bool) -> float:
    """Correlation of indicator events driven by a single uniform, by splitting [0, 1] at every breakpoint."""
    hi2 = p2 if comonotone else 1.0
    lo2 = 0.0 if comonotone else 1.0 - p2
    cuts = sorted({0.0, 1.0, p1, lo2, hi2})
    mass = {(0, 0): 0.0, (0, 1): 0.0, (1, 0): 0.0, (1, 1): 0.0}
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        mass[(int(mid < p1), int(lo2 < mid < hi2))] += b - a
    ex = mass[(1, 0)] + mass[(1, 1)]
    ey = mass[(0, 1)] + mass[(1, 1)]
    return (mass[(1, 1)] - ex * ey) / math.sqrt(ex * (1 - ex) * ey * (1 - ey))


def test_criterion_01_frechet_bounds(verdict):
    t0 = time.perf_counter()
    grid = np.arange(1, 100)
    worst = 0.0
    iff_ok = True
    for i in grid:
        for j in grid:
            p1, p2 = i / 100, j / 100
            lo, hi = frechet_bounds(p1, p2)
            worst = max(worst, abs(hi - extremal_coupling_correlation(p1, p2, True)))
            worst = max(worst, abs(lo - extremal_coupling_correlation(p1, p2, False)))
            iff_ok &= (abs(hi - 1.0) < 1e-12) == (i == j)
            iff_ok &= (abs(lo + 1.0) < 1e-12) == (i + j == 100)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and iff_ok and elapsed < 5
    verdict(1, "Frechet-Hoeffding closed forms on 99x99 grid", ok, f"max err {worst:.1e}, iff {iff_ok}, {elapsed:.2f}s")


# ---------------------------------------------------------------- criterion 2


def test_criterion_02_cev_monte_carlo(verdict):
    t0 = time.perf_counter()
    misses = []
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        k = 6
        a = rng.dirichlet(np.ones(k))
        p = rng.uniform(0.05, 0.6, k)
        latent = random_latent_correlation(k, rng)
        rho = induced_binary_correlation(p, latent)
        mean, se_mean, var, se_var = mc_moments(a, p, latent, 1_000_000, rng)
        z_mean = abs(mean - cre(a, p)) / se_mean
        z_var = abs(var - cev(a, p, rho)) / se_var
        if z_mean >= 3 or z_var >= 3:
            misses.append((seed, round(z_mean, 2), round(z_var, 2)))
    elapsed = time.perf_counter() - t0
    ok = not misses and elapsed < 60
    verdict(2, "CEV and CRE against 1e6-draw Monte Carlo, 20 configs", ok, f"misses {misses}, {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 3


def test_criterion_03_uniform_limit(verdict):
    t0 = time.perf_counter()
    K, p, rho = 10_000, 0.5, 0.4
    v = p * (1 - p)
    idio, systemic = uniform_limit_decomposition(K, p, rho)
    # independent route: sums over the K regions without forming the K x K matrix
    a = np.full(K, 1.0 / K)
    scaled = a * math.sqrt(v)
    idio_sum = math.fsum(scaled * scaled)
    systemic_sum = rho * (math.fsum(scaled) ** 2 - idio_sum)
    # the closed form agrees with the full quadratic form where the matrix is affordable
    k_small = 500
    c = np.full((k_small, k_small), rho)
    np.fill_diagonal(c, 1.0)
    small = cev_terms(np.full(k_small, 1 / k_small), np.full(k_small, p), c)
    elapsed = time.perf_counter() - t0

    idio_exact = idio == v / K and abs(idio_sum - v / K) < 1e-15
    routes_agree = abs(systemic - systemic_sum) < 1e-12 and np.allclose(
        small[1:], uniform_limit_decomposition(k_small, p, rho), atol=1e-12, rtol=0
    )
    gap = abs(systemic - rho * v)
    ok = idio_exact and routes_agree and gap <= 1e-6 and elapsed < 1
    verdict(
        3,
        "uniform-limit terms at K=10000",
        ok,
        f"idio exact {idio_exact}, routes agree {routes_agree}, |systemic - rho p(1-p)| = {gap:.3e} (limit 1e-6), {elapsed:.2f}s",
    )


# ---------------------------------------------------------------- criterion 4


def test_criterion_04_logistic_recovery(verdict):
    t0 = time.perf_counter()
    beta = np.array([-2.0, 1.5, 1.0])
    n = 2000
    s = np.arange(n) / (n - 1)
    prob = 1 / (1 + np.exp(-(beta[0] + beta[1] * s + beta[2] * s * s)))
    hits = np.zeros(3)
    for seed in range(50):
        y = (np.random.default_rng(seed).random(n) < prob).astype(int)
        m = fit_logistic(y)
        hits += np.abs(m.coefficients - beta) <= 2 * np.asarray(m.std_errors)
    coverage = hits / 50

    # perfectly separable labels have no finite maximum-likelihood estimate
    t = np.arange(n) - n / 2
    clean = (t > 0).astype(int)
    try:
        fit_logistic(clean, t, time_scale=n / 20)
        separation_flagged = False
    except SeparationError:
        separation_flagged = True
    # separable up to five flipped labels on each side of the change point
    aurocs = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        y = clean.copy()
        flip = np.r_[rng.choice(n // 2, 5, replace=False), n // 2 + rng.choice(n // 2, 5, replace=False)]
        y[flip] = 1 - y[flip]
        m = fit_logistic(y, t, time_scale=n / 20)
        aurocs.append(evaluate_classifier(predict_probability(m, t), y).auroc)
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(coverage >= 0.9)) and min(aurocs) >= 0.99 and separation_flagged and elapsed < 30
    verdict(
        4,
        "logistic coefficient coverage and AUROC",
        ok,
        f"coverage {np.round(coverage, 2).tolist()}, min AUROC {min(aurocs):.4f}, separation flagged {separation_flagged}, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------- criterion 5


def test_criterion_05_two_asset_frontier(verdict):
    mu = np.array([0.10, 0.04])
    sd = np.array([0.25, 0.10])
    cov = np.outer(sd, sd) * np.array([[1.0, 0.3], [0.3, 1.0]])
    objective = PortfolioObjectives(mu, cov, climate="none")

    # efficient branch of w = (x, 1 - x): from the minimum-variance mix up to all in the high-return asset
    x_mv = (cov[1, 1] - cov[0, 1]) / (cov[0, 0] + cov[1, 1] - 2 * cov[0, 1])
    x = np.linspace(x_mv, 1.0, 20001)
    curve = np.column_stack([x**2 * cov[0, 0] + (1 - x) ** 2 * cov[1, 1] + 2 * x * (1 - x) * cov[0, 1], x * mu[0] + (1 - x) * mu[1]])

    sizes, dominated_at = [], []

    def watch(t, archive):
        sizes.append(len(archive))
        if not pairwise_nondominated(archive.objectives):
            dominated_at.append(t)

    t0 = time.perf_counter()
    archive = run_mopso(objective, 2, MopsoConfig(), callback=watch)
    elapsed = time.perf_counter() - t0

    pts = np.column_stack([archive.objectives[:, 1], -archive.objectives[:, 0]])
    dist = np.sqrt(((pts[:, None, :] - curve[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
    ok = dist.max() <= 1e-3 and not dominated_at and max(sizes) <= 400 and elapsed < 30
    verdict(
        5,
        "two-asset archive on the analytic frontier",
        ok,
        f"max distance {dist.max():.2e}, dominated iterations {len(dominated_at)}, max size {max(sizes)}, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------- criterion 6


class SimplexAudit:
    """Wraps an objective and audits every position it is asked to evaluate."""

    def __init__(self, objective):
        self.objective = objective
        self.count = 0
        self.sum_error = 0.0
        self.lowest = np.inf
        self.highest = -np.inf

    def __call__(self, W):
        self.count += len(W)
        self.sum_error = max(self.sum_error, float(np.abs(W.sum(axis=1) - 1).max()))
        self.lowest = min(self.lowest, float(W.min()))
        self.highest = max(self.highest, float(W.max()))
        return self.objective(W)


def test_criterion_06_determinism_and_simplex(verdict):
    objective = synthetic_objectives(120, seed=61)
    cfg = MopsoConfig(n_pop=500, iter=300, seed=2024)
    audit = SimplexAudit(objective)
    t0 = time.perf_counter()
    first = run_mopso(audit, 120, cfg)
    elapsed = time.perf_counter() - t0
    second = run_mopso(objective, 120, cfg)

    identical = np.array_equal(first.positions, second.positions) and np.array_equal(first.objectives, second.objectives)
    feasible = audit.sum_error <= 1e-9 and audit.lowest >= 0.0 and audit.highest <= 1.0
    ok = identical and feasible and audit.count == first.n_evaluations and elapsed < 120
    verdict(
        6,
        "MOPSO determinism and simplex integrity at N=120",
        ok,
        f"identical {identical}, {audit.count} positions, max |sum-1| {audit.sum_error:.1e}, "
        f"range [{audit.lowest:.3g}, {audit.highest:.3g}], {elapsed:.1f}s per run (reference 217.39s)",
    )


# ---------------------------------------------------------------- criterion 7


@pytest.mark.slow
def test_criterion_07_sweep_ordering(verdict):
    objective = synthetic_objectives(20, seed=71)
    t0 = time.perf_counter()
    runs = sweep_runs(objective, 20, {"iter": [300], "n_pop": [500], "n_rep": [100, 200, 400]}, replications=10, seed=700)
    rows, _ = summarize(runs)
    elapsed = time.perf_counter() - t0
    rows = sorted(rows, key=lambda r: r.n_rep)
    hv = [r.hypervolume for r in rows]
    sp = {r.n_rep: r.spacing for r in rows}
    ok = hv[0] < hv[1] < hv[2] and sp[400] < sp[100] and elapsed < 1800
    verdict(
        7,
        "sweep hypervolume and spacing ordering over n_rep",
        ok,
        f"hv {[f'{h:.4g}' for h in hv]}, spacing 100/400 {sp[100]:.3g}/{sp[400]:.3g}, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------- criterion 8


def test_criterion_08_front_metric_oracles(verdict):
    exact = hypervolume([[1.0, 2.0], [2.0, 1.0]], [3.0, 3.0]) == 3.0
    rng = np.random.default_rng(808)
    z_scores = []
    for _ in range(5):
        x = np.abs(rng.normal(size=(30, 3)))
        F = 1.0 - x / np.linalg.norm(x, axis=1, keepdims=True)
        ref = default_reference(F)
        est, se = box_sampling_hypervolume(F, ref, 400_000, rng)
        z_scores.append(abs(hypervolume(F, ref) - est) / se)
    sp_err = abs(spacing([[0.0], [1.0], [3.0]]) - 1 / math.sqrt(3))
    jac_err = abs(jaccard_distance([0.5, 0.5, 0.0], [0.5, 0.0, 0.5]) - 2 / 3)
    ok = exact and max(z_scores) < 3 and sp_err <= 1e-12 and jac_err <= 1e-12
    verdict(
        8,
        "hypervolume, spacing and Jaccard oracles",
        ok,
        f"exact 3.0 {exact}, max MC z {max(z_scores):.2f}, spacing err {sp_err:.1e}, jaccard err {jac_err:.1e}",
    )


# ---------------------------------------------------------------- criterion 9


def test_criterion_09_regression_oracles(verdict):
    # y = (1, 2, 4) on x = (0, 1, 2): normal equations give slope 3/2 and intercept 5/6
    x = np.array([0.0, 1.0, 2.0])
    r = ols(RegressionSpec(np.array([1.0, 2.0, 4.0]), np.column_stack([np.ones(3), x]), ("const", "x")))
    ols_err = max(abs(r.coef("x") - 1.5), abs(r.coef("const") - 5 / 6))

    X = np.array([[1.0, 0.5], [1.0, -1.0], [1.0, 2.0], [1.0, 0.0]])
    y = np.array([1.0, -0.5, 2.5, 0.3])
    res = fit(RegressionSpec(y, X, ("c", "x"), 1))
    brute = brute_force_sandwich(X, res.residuals, 1)
    nw_err = max(
        np.abs(newey_west_covariance(X, res.residuals, 1) - brute).max(),
        np.abs(res.hac_standard_errors - np.sqrt(np.diag(brute))).max(),
    )

    rng = np.random.default_rng(9)
    Xw = np.column_stack([np.ones(60), rng.normal(size=60)])
    u = rng.normal(size=60) * (1 + np.abs(Xw[:, 1]))
    bread = np.linalg.inv(Xw.T @ Xw)
    white = bread @ (Xw.T * u**2) @ Xw @ bread
    white_err = np.abs(newey_west_covariance(Xw, u, 0) - white).max()

    pooled = panel_regression(simulate_panel(-0.003, 7), pooled_gamma=True)["ALL"]
    z = abs(pooled.coef("gamma") + 0.003) / pooled.se("gamma")
    ok = ols_err <= 1e-10 and nw_err <= 1e-12 and white_err <= 1e-14 and z < 3
    verdict(
        9,
        "OLS, Newey-West and panel recovery",
        ok,
        f"ols err {ols_err:.1e}, sandwich err {nw_err:.1e}, white err {white_err:.1e}, "
        f"gamma {pooled.coef('gamma'):.5f} ({z:.2f} SE from -0.003)",
    )


# ---------------------------------------------------------------- criterion 10


def _data(b):
    return BacktestData(
        build_anomaly_panel(b.temperatures), b.firms, b.monthly_returns, b.daily_returns, b.caps, b.return_months
    )


def test_criterion_10_backtest_accounting(verdict):
    hand = [
        abs(cagr(np.full(24, 2 ** (1 / 24) - 1)) - (math.sqrt(2) - 1)),
        abs(max_drawdown([0.2, 90 / 120 - 1, 110 / 90 - 1]) - 0.25),
        abs(sharpe([0.01, 0.03]) - 0.02 / math.sqrt(2e-4) * math.sqrt(12)),
        abs(sortino([0.05, -0.02, 0.03, -0.04]) - 0.005 / math.sqrt((0.02**2 + 0.04**2) / 4) * math.sqrt(12)),
    ]

    single = generate_synthetic_bundle(21, 1, 3, 1032, return_months=66)
    start = single.return_months[60]
    one = run_backtest(BacktestConfig(start, start + 2, mopso_config=MopsoConfig(n_pop=20, iter=5, n_rep=10)), _data(single))
    series = [res.returns for res in one.strategies.values()]
    single_ok = len(series) == len(ALL_STRATEGIES) and all(np.array_equal(s, series[0]) for s in series)

    b = generate_synthetic_bundle(2024, 10, 6, 1032, return_months=84)
    start = b.return_months[60]
    cfg = BacktestConfig(start, start + 23)
    data = _data(b)
    t0 = time.perf_counter()
    report = run_backtest(cfg, data)
    elapsed = time.perf_counter() - t0
    again = run_backtest(cfg, data)

    product_err = max(
        abs(res.cumulative[-1] - math.prod(1 + r for r in res.returns)) for res in report.strategies.values()
    )
    deterministic = all(
        np.array_equal(res.returns, again.strategies[name].returns)
        and np.array_equal(res.weights, again.strategies[name].weights)
        for name, res in report.strategies.items()
    )
    ok = (
        max(hand) <= 1e-10
        and single_ok
        and product_err <= 1e-12
        and deterministic
        and len(report.months) == 24
        and elapsed < 300
    )
    verdict(
        10,
        "backtest accounting, metrics and determinism",
        ok,
        f"hand err {max(hand):.1e}, single asset {single_ok}, product err {product_err:.1e}, "
        f"deterministic {deterministic}, 24-month run {elapsed:.0f}s",
    )
