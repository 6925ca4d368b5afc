"""Vector autoregressive processes treated as structural causal models.

Simulation under interventions, joint estimation from observational and
interventional regimes, total causal effect matrices, and exact
counterfactual prediction for past hypothetical interventions.
"""

from ._backend import BACKEND_NAME, available_backends
from .counterfactual import (CounterfactualQuery, CounterfactualResult,
                             DeltaSummary, additive_override, effect_summary,
                             merge_schedules, oracle_resimulation,
                             predict_abduction, predict_delta)
from .dataset import (IndexPartition, RegressionRow, build_all_rows, build_rows,
                      format_partition, load_recording, partition, row_arrays,
                      save_recording)
from .effects import (EffectMatrices, StabilityReport, companion_matrix,
                      iter_effects, point_effect, spectral_radius,
                      stability_report, total_effects)
from .errors import (ConfigError, DataError, DeltaMethodError, FormatError,
                     ModelError, RankDeficiencyError, ScheduleError,
                     UnrecoverableNoiseError, VarCausalError)
from .estimation import (FitConfig, FitReport, StackedCoefficients,
                         coefficient_mse, critical_penalty, empirical_noise_cov,
                         fit_lasso, fit_ols, objective_naive,
                         objective_stratified, select_penalty,
                         subgradient_violation)
from .model import (InterventionMechanism, InterventionSchedule, Recording,
                    ScheduleEntry, VarModel, clamp, lagged_regressors,
                    mechanism_output, modify, random_model, recover_residuals,
                    simulate, toeplitz_covariance)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME", "available_backends",
    "VarModel", "InterventionMechanism", "ScheduleEntry", "InterventionSchedule",
    "Recording", "clamp", "modify", "simulate", "mechanism_output",
    "recover_residuals", "random_model", "toeplitz_covariance", "lagged_regressors",
    "IndexPartition", "RegressionRow", "partition", "build_rows", "build_all_rows",
    "row_arrays", "format_partition", "load_recording", "save_recording",
    "StackedCoefficients", "FitConfig", "FitReport", "fit_ols", "fit_lasso",
    "objective_naive", "objective_stratified", "coefficient_mse",
    "critical_penalty", "select_penalty", "empirical_noise_cov",
    "subgradient_violation",
    "EffectMatrices", "StabilityReport", "total_effects", "companion_matrix",
    "iter_effects", "point_effect", "spectral_radius", "stability_report",
    "CounterfactualQuery", "CounterfactualResult", "DeltaSummary",
    "predict_delta", "predict_abduction", "oracle_resimulation",
    "merge_schedules", "additive_override", "effect_summary",
    "VarCausalError", "ModelError", "ScheduleError", "DataError", "FormatError",
    "RankDeficiencyError", "UnrecoverableNoiseError", "DeltaMethodError",
    "ConfigError",
]
