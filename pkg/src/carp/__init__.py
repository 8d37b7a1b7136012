"""Bivariate covariate-adjusted recurrent-event process modeling.

Two gap-time model variants (bivariate lognormal; lognormal marginals with a
Gumbel copula), exact likelihood evaluation and ML fitting with asymptotic
inference, process simulation with a study harness, cumulative-intensity
diagnostics, CSV ingestion, and an HTTP service with a thin CLI client.
"""

__version__ = "0.1.0"

from .distributions import (
    CholeskyCovariance,
    GumbelParam,
    LognormalMarginal,
    bvn_cdf,
    conditional_lognormal,
    gumbel_cdf,
    gumbel_partial,
    kendall_tau_gumbel,
    kendall_tau_mln,
    mln_joint_sf,
    std_normal_cdf,
)
from .events import (
    AgeState,
    EventHistory,
    EventRecord,
    age_trajectory,
    extract_gaps,
    validate_history,
)
from .io import ingest_csv, serialize_history_csv, summarize
from .likelihood import (
    FitResult,
    OptimizerConfig,
    aic,
    fit,
    log_likelihood,
    numerical_hessian,
    tau_with_ci,
)
from .model import (
    GumbelCopulaModel,
    MlnModel,
    cumulative_intensity,
    make_model,
    sub_intensity,
)
from .simulate import (
    CovariateLaw,
    FitSpec,
    Scenario,
    SimConfig,
    StudyResult,
    run_study,
    sample_conditional_gap,
    simulate_history,
)

__all__ = [
    "__version__",
    "CholeskyCovariance",
    "GumbelParam",
    "LognormalMarginal",
    "bvn_cdf",
    "conditional_lognormal",
    "gumbel_cdf",
    "gumbel_partial",
    "kendall_tau_gumbel",
    "kendall_tau_mln",
    "mln_joint_sf",
    "std_normal_cdf",
    "AgeState",
    "EventHistory",
    "EventRecord",
    "age_trajectory",
    "extract_gaps",
    "validate_history",
    "ingest_csv",
    "serialize_history_csv",
    "summarize",
    "FitResult",
    "OptimizerConfig",
    "aic",
    "fit",
    "log_likelihood",
    "numerical_hessian",
    "tau_with_ci",
    "GumbelCopulaModel",
    "MlnModel",
    "cumulative_intensity",
    "make_model",
    "sub_intensity",
    "CovariateLaw",
    "FitSpec",
    "Scenario",
    "SimConfig",
    "StudyResult",
    "run_study",
    "sample_conditional_gap",
    "simulate_history",
]
