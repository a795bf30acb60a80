"""Data cleaning-adjusted causal inference for corrupted covariates.

Pipeline: estimate observation rates and zero-fill missing entries, truncate
the filled training covariates to their top principal components, fit
error-in-variable regression and balancing coefficients by minimal-norm
least squares, then score raw test rows with a doubly robust influence
function under cross-fitting. Companion modules simulate corrupted data,
calibrate Laplace privacy mechanisms, and run Monte Carlo coverage grids.
"""

from .cleaning import (
    CleanedMatrix,
    CleaningModel,
    estimate_rates,
    fill,
    fill_row,
    fit_cleaning,
    numerical_rank,
    pca_truncate,
    scree,
    suggest_k,
)
from .corrupt import (
    THETA_TRUE,
    CorruptedDataset,
    CorruptionSpec,
    SignalMatrix,
    conditional_mean_check,
    corrupt,
    generate_factor_signal,
    sigma_for_noise_ratio,
    simulate_dgp,
    truncated_logistic,
)
from .dictionary import Dictionary, apply, apply_d_derivative, apply_matrix
from .dr import (
    InferenceResult,
    cross_fit_estimate,
    fold_indices,
    influence_score,
    summarize_scores,
)
from .eiv import (
    CounterfactualMoment,
    EivFit,
    balance_report,
    counterfactual_moment,
    fit_balance,
    fit_regression,
    predict,
    predict_matrix,
)
from .errors import (
    ConfigurationError,
    DegenerateFitError,
    DimensionError,
    DrcleanError,
    EmptyKernelWindowError,
    NumericalError,
    WeakInstrumentError,
)
from .estimands import (
    Ate,
    AverageDerivative,
    Estimand,
    Late,
    LocalizedAte,
    PartiallyLinear,
    Pliv,
    PolicyAffine,
    kernel_weights,
    moment_rows,
)
from .harness import (
    CellConfig,
    CoverageRow,
    ExperimentConfig,
    RepRecord,
    parse_experiment_config,
    run_cell,
    run_cell_detailed,
    run_grid,
    studentize,
    studentized_dump,
)
from .privacy import (
    CentralDpSpec,
    MicroDpSpec,
    central_scale,
    central_subexp_bound,
    micro_scale,
    micro_subexp_bound,
    p_over_L_diagnostic,
    privatize,
    scale_to_sigma,
    sigma_to_scale,
)

__version__ = "0.1.0"
