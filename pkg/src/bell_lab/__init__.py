"""Statistical tests on EPR-Bohm polarization coincidence data.

Quantum (maximally and nonmaximally entangled) and local-hidden-variable
predictions, a Monte Carlo count generator with compensating anomalies, the
family of linear-combination tests E_c, and minimum chi-square fitting.
"""

__version__ = "0.1.0"

from .inequality import (
    CORRELATION,
    ChshAngles,
    CoefficientVector,
    chsh_statistic,
    correlation,
    linear_combination,
    optimal_coefficients,
)
from .model import (
    AnalyzerSettings,
    ModelKind,
    ProbabilityQuad,
    StateModel,
    lhv_correlation,
    lhv_probabilities,
    lhv_response,
    predict_probabilities,
)
from .simulator import (
    CountsRecord,
    ExperimentPlan,
    NoiseConfig,
    apply_anomaly,
    run_experiment,
    sample_counts,
)
from .statistics import (
    EmpiricalQuad,
    TestResult,
    chi_square_statistic,
    compensation_ratio,
    empirical_quad,
    evaluate_test,
    multinomial_covariance,
)
from .fitting import FitFamily, FitResult, fit_model, nelder_mead

__all__ = [
    "CORRELATION",
    "ChshAngles",
    "CoefficientVector",
    "chsh_statistic",
    "correlation",
    "linear_combination",
    "optimal_coefficients",
    "AnalyzerSettings",
    "ModelKind",
    "ProbabilityQuad",
    "StateModel",
    "lhv_correlation",
    "lhv_probabilities",
    "lhv_response",
    "predict_probabilities",
    "CountsRecord",
    "ExperimentPlan",
    "NoiseConfig",
    "apply_anomaly",
    "run_experiment",
    "sample_counts",
    "EmpiricalQuad",
    "TestResult",
    "chi_square_statistic",
    "compensation_ratio",
    "empirical_quad",
    "evaluate_test",
    "multinomial_covariance",
    "FitFamily",
    "FitResult",
    "fit_model",
    "nelder_mead",
]
