"""Empirical-Bayes two-groups inference for large-scale testing.

Local and tail-area false discovery rates, exceedance-probability selection
of large random effects, mixture estimation from data, variance moderation
for t-denominators, and a repeated-sampling harness for interval coverage.
"""

__version__ = "0.1.0"

from .coverage import (
    INTERVAL_METHODS,
    BowingProfile,
    CoverageResult,
    ShrinkageState,
    bowing_profile,
    fit_shrinkage_state,
    interval_bounds,
    run_coverage_study,
)
from .errors import (
    BoundaryFitWarning,
    DegeneratePointError,
    EmpiricalNullError,
    GridBoundaryWarning,
    InsufficientDataError,
    InsufficientGroupsError,
    InvalidInputError,
    TotalShrinkageWarning,
)
from .estimation import FitResult, fit_empirical_null, fit_npmle_grid, fit_parametric
from .model import MixingDistribution, NullComponent, TwoGroupsModel, ZPanel
from .moderation import (
    ExpressionMatrix,
    ModeratedScores,
    TwoSampleScores,
    moderated_pipeline,
    shrink_variances,
    two_sample_scores,
)
from .posterior import (
    HPosterior,
    KSensitivity,
    PosteriorSummary,
    SelectionReport,
    exceedance_probability,
    expected_exceedance_in_tail,
    h_posterior,
    local_fdr,
    ranking_k_sensitivity,
    select_and_rank,
    tail_fdr,
    two_tailed_exceedance,
)

__all__ = [
    "__version__",
    "BowingProfile",
    "BoundaryFitWarning",
    "CoverageResult",
    "DegeneratePointError",
    "EmpiricalNullError",
    "ExpressionMatrix",
    "FitResult",
    "GridBoundaryWarning",
    "HPosterior",
    "INTERVAL_METHODS",
    "InsufficientDataError",
    "InsufficientGroupsError",
    "InvalidInputError",
    "KSensitivity",
    "MixingDistribution",
    "ModeratedScores",
    "NullComponent",
    "PosteriorSummary",
    "SelectionReport",
    "ShrinkageState",
    "TotalShrinkageWarning",
    "TwoGroupsModel",
    "TwoSampleScores",
    "ZPanel",
    "bowing_profile",
    "exceedance_probability",
    "expected_exceedance_in_tail",
    "fit_empirical_null",
    "fit_npmle_grid",
    "fit_parametric",
    "fit_shrinkage_state",
    "h_posterior",
    "interval_bounds",
    "local_fdr",
    "moderated_pipeline",
    "ranking_k_sensitivity",
    "run_coverage_study",
    "select_and_rank",
    "shrink_variances",
    "tail_fdr",
    "two_sample_scores",
    "two_tailed_exceedance",
]
