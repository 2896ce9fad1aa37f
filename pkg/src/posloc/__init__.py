"""Minimax and generalized Bayes estimation of a nonnegative location.

The observation is a pair (X, S) from a spherically symmetric location-scale
model with location mu >= 0 and unknown scale.  The package constructs the
minimum risk equivariant estimator, its truncated version, and generalized
Bayes estimators under power priors, and verifies dominance, robustness,
monotonicity, and sign-change properties by quadrature and Monte Carlo.
"""

from ._backend import backend_name, compiled_available
from .errors import (
    AccuracyError,
    AssumptionError,
    ConfigError,
    ExistenceError,
    InternalConsistencyError,
    InvalidParameterError,
    NonNormalizableError,
    NoRootError,
    PoslocError,
    SingularityError,
)
from .numerics import QuadratureSpec
from .models import (
    AssumptionReport,
    ProblemSetup,
    angular_constant,
    canonicalize,
    check_assumptions,
    density_from_json,
    density_to_json,
    joint_density,
    make_density,
    normalizing_constant,
    sample_xs,
)
from .losses import (
    Loss,
    check_overestimation_condition,
    loss_from_json,
    loss_to_json,
    make_asym_power,
    make_custom,
    make_power,
)
from .estimators import (
    EstimatorSpec,
    ShrinkTable,
    UnitProfile,
    estimator_from_json,
    estimator_to_json,
    evaluate,
    inverse_bound_report,
    mre_constant,
    ordering_report,
    shrink_limit,
    shrink_table,
    shrink_value,
    upper_bound_report,
)
from .risk import (
    DominanceReport,
    RiskCurve,
    SlopeDensity,
    classify_sign_pattern,
    default_lambda_grid,
    dominance_check,
    risk_at_scale,
    risk_curve,
    risk_diff_kernel,
    risk_diff_slope,
    risk_mc,
    risk_mc_paired,
    risk_quadrature,
    weighted_tail_prob,
)
from .suite import (
    CriterionResult,
    SuiteReport,
    criterion_names,
    run_criterion,
    run_suite,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "AssumptionError",
    "AssumptionReport",
    "ConfigError",
    "CriterionResult",
    "DominanceReport",
    "EstimatorSpec",
    "ExistenceError",
    "InternalConsistencyError",
    "InvalidParameterError",
    "Loss",
    "NoRootError",
    "NonNormalizableError",
    "PoslocError",
    "ProblemSetup",
    "QuadratureSpec",
    "RiskCurve",
    "ShrinkTable",
    "SingularityError",
    "SlopeDensity",
    "SuiteReport",
    "UnitProfile",
    "angular_constant",
    "backend_name",
    "canonicalize",
    "check_assumptions",
    "check_overestimation_condition",
    "classify_sign_pattern",
    "compiled_available",
    "criterion_names",
    "default_lambda_grid",
    "density_from_json",
    "density_to_json",
    "dominance_check",
    "estimator_from_json",
    "estimator_to_json",
    "evaluate",
    "inverse_bound_report",
    "joint_density",
    "loss_from_json",
    "loss_to_json",
    "make_asym_power",
    "make_custom",
    "make_density",
    "make_power",
    "mre_constant",
    "normalizing_constant",
    "ordering_report",
    "risk_at_scale",
    "risk_curve",
    "risk_diff_kernel",
    "risk_diff_slope",
    "risk_mc",
    "risk_mc_paired",
    "risk_quadrature",
    "run_criterion",
    "run_suite",
    "sample_xs",
    "shrink_limit",
    "shrink_table",
    "shrink_value",
    "upper_bound_report",
    "weighted_tail_prob",
]
