"""Physical climate risk analytics and climate-aware multi-objective portfolio selection."""
__version__ = "0.1.0"

from .anomaly import (
    build_anomaly_panel,
    evaluate_classifier,
    fit_baseline,
    fit_logistic,
    fit_region_models,
    flag_extremes,
    predict_probability,
    standardize,
)
from .backtest import BacktestConfig, BacktestData, run_backtest
from .climate import cev, climate_exposure, climate_weights, cre, stress_cev, uniform_limit_decomposition
from .data import (
    FirmProfile,
    MonthStamp,
    ReturnPanel,
    TemperaturePanel,
    generate_synthetic_bundle,
    generate_synthetic_universe,
)
from .dependence import check_admissibility, correlation_bounds, frechet_bounds, pearson_binary
from .errors import PhysRiskError
from .estimation import conditioning_gate, estimate_inputs, shrunk_covariance
from .front import hypervolume, jaccard_distance, scalarize_select, spacing
from .mopso import MopsoConfig, run_mopso
from .objectives import PortfolioObjectives
