"""Grey-box NARX identification from dynamical records and steady-state pairs.

The package fits polynomial and single-hidden-layer tanh NARX models to a
dynamical record while steering their steady-state behaviour toward measured
(u_bar, y_bar) operating points.  The static side enters the cost without any
fixed-point iteration: each pair is substituted straight into the one-step
predictor, which keeps the blended objective cheap and exact at interpolating
optima.  A numerically iterated static cost and a GA baseline built on it are
kept for comparison.
"""

from .data import (
    DynDataset,
    NoiseSpec,
    SimSystem,
    SteadyDataset,
    make_example1_datasets,
    make_example2_datasets,
    read_csv,
    simulate_system,
    steady_curve_of_system,
    write_csv,
)
from .errors import (
    ConfigError,
    CsvFormatError,
    DivergenceError,
    GreyboxError,
    SelectionError,
    SingularityError,
)
from .estimation import (
    ErrorVector,
    GaConfig,
    LmConfig,
    StackedSystem,
    TrainConfig,
    build_error_vector,
    build_stacked_system,
    fit_ga_legacy,
    fit_ols,
    fit_weighted_lm,
    fit_wls,
    mlp_jacobian,
)
from .models import (
    EvalCounter,
    FreeRunResult,
    MlpModel,
    PolynomialModel,
    RegressorSpec,
    build_regression_matrix,
    build_static_regressors,
    example_structure,
    free_run,
    free_run_on_dataset,
    load_model,
    model_from_json,
    model_to_json,
    predict_one_step,
    save_model,
)
from .steady_state import (
    CostReport,
    FixedPointConfig,
    FixedPointResult,
    StaticCurve,
    cost_jd,
    cost_js_hat,
    cost_js_legacy,
    cost_jsd_hat,
    cost_jsd_legacy,
    cost_report,
    fixed_point_iterate,
    model_static_curve,
)
from .sweep import (
    LambdaGrid,
    ParetoPoint,
    decide_min_corr,
    decide_min_rmse_zt,
    pareto_front,
    rmse,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CostReport",
    "CsvFormatError",
    "DivergenceError",
    "DynDataset",
    "ErrorVector",
    "EvalCounter",
    "FixedPointConfig",
    "FixedPointResult",
    "FreeRunResult",
    "GaConfig",
    "GreyboxError",
    "LambdaGrid",
    "LmConfig",
    "MlpModel",
    "NoiseSpec",
    "ParetoPoint",
    "PolynomialModel",
    "RegressorSpec",
    "SelectionError",
    "SimSystem",
    "SingularityError",
    "StackedSystem",
    "StaticCurve",
    "SteadyDataset",
    "TrainConfig",
    "build_error_vector",
    "build_regression_matrix",
    "build_stacked_system",
    "build_static_regressors",
    "cost_jd",
    "cost_js_hat",
    "cost_js_legacy",
    "cost_jsd_hat",
    "cost_jsd_legacy",
    "cost_report",
    "decide_min_corr",
    "decide_min_rmse_zt",
    "example_structure",
    "fit_ga_legacy",
    "fit_ols",
    "fit_weighted_lm",
    "fit_wls",
    "fixed_point_iterate",
    "free_run",
    "free_run_on_dataset",
    "load_model",
    "make_example1_datasets",
    "make_example2_datasets",
    "mlp_jacobian",
    "model_from_json",
    "model_static_curve",
    "model_to_json",
    "pareto_front",
    "predict_one_step",
    "read_csv",
    "rmse",
    "run_sweep",
    "save_model",
    "simulate_system",
    "steady_curve_of_system",
    "write_csv",
]
