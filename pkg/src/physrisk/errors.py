"""Exception hierarchy.

Every error carries a stable ``code`` so the command line can emit a
machine-readable error object.
"""
from __future__ import annotations


class PhysRiskError(Exception):
    code = "error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class MissingFile(PhysRiskError, FileNotFoundError):
    code = "missing_file"


class ParseError(PhysRiskError, ValueError):
    code = "parse_error"

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


class MissingData(PhysRiskError, ValueError):
    code = "missing_data"

    def __init__(self, region: str, month: str):
        super().__init__(f"missing value for region {region!r} at {month}")
        self.region = region
        self.month = month


class GapInSeries(PhysRiskError, ValueError):
    code = "gap_in_series"


class InvalidFundamental(PhysRiskError, ValueError):
    code = "invalid_fundamental"


class ShareSumError(PhysRiskError, ValueError):
    code = "share_sum_error"


class InsufficientBaseline(PhysRiskError, ValueError):
    code = "insufficient_baseline"


class DegenerateBaseline(PhysRiskError, ValueError):
    code = "degenerate_baseline"


class SingleClassError(PhysRiskError, ValueError):
    code = "single_class"


class SeparationError(PhysRiskError, ArithmeticError):
    code = "separation"


class ZeroVarianceSeries(PhysRiskError, ValueError):
    code = "zero_variance_series"

    def __init__(self, region):
        super().__init__(f"indicator series for region {region!r} is constant")
        self.region = region


class DegenerateMarginal(PhysRiskError, ValueError):
    code = "degenerate_marginal"


class ZeroClimateMass(PhysRiskError, ValueError):
    code = "zero_climate_mass"


class CollinearDesign(PhysRiskError, ValueError):
    code = "collinear_design"


class InsufficientHistory(PhysRiskError, ValueError):
    code = "insufficient_history"

    def __init__(self, message: str, firm: str | None = None):
        super().__init__(message)
        self.firm = firm


class ObjectiveEvaluationError(PhysRiskError, ArithmeticError):
    code = "objective_evaluation"

    def __init__(self, weights):
        super().__init__("objective function returned a non-finite value")
        self.weights = weights


class ReferencePointError(PhysRiskError, ValueError):
    code = "reference_point"


class TooFewPoints(PhysRiskError, ValueError):
    code = "too_few_points"


class MissingCapWeights(PhysRiskError, ValueError):
    code = "missing_cap_weights"


class TotalLoss(PhysRiskError, ValueError):
    code = "total_loss"


class ZeroVolatility(PhysRiskError, ZeroDivisionError):
    code = "zero_volatility"


class NoDownside(PhysRiskError, ZeroDivisionError):
    code = "no_downside"


class ConditioningError(PhysRiskError, ArithmeticError):
    code = "ill_conditioned"
