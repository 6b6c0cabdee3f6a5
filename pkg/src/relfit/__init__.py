"""Kernel-based multiple model comparison.

Given a reference sample and l candidate models (samples or unnormalized
densities given by score functions), select the best-fitting candidate and
test which of the others are significantly worse. Two procedures are
provided: selection-corrected testing on the full sample (``rel_psi``) and
data splitting with false-discovery-rate control (``rel_multi``), both on
top of complete or linear-time U-statistic estimators of squared MMD and
squared KSD.
"""

from .comparison import (
    ComparisonResult,
    DensityModel,
    PairResult,
    SampleModel,
    by_correction,
    median_kernel_spec,
    rel_multi,
    rel_pair,
    rel_psi,
    select_reference,
)
from .covariance import (
    DiscrepancyVector,
    joint_vector,
    ksd_joint_covariance,
    ksd_linear_covariance,
    ksd_projection_means,
    mmd_joint_covariance,
    mmd_linear_covariance,
    mmd_projection_means,
    regularize,
)
from .discrepancy import (
    DiscrepancyKind,
    h_kernel,
    ksd2_u_complete,
    ksd2_u_linear,
    mmd2_u_complete,
    mmd2_u_linear,
    stein_kernel,
)
from .harness import (
    RunConfig,
    TrialMetrics,
    decision_rates,
    kolmogorov_uniform,
    run_bench,
    run_calibrate,
)
from .kernels import KernelSpec, median_heuristic
from .models import (
    GaussianRbmSpec,
    GaussianSpec,
    MixtureSpec,
    Problem,
    available_problems,
    gaussian_sample,
    gaussian_score,
    make_problem,
    mixture_sample,
    mixture_score,
    rbm_sample,
    rbm_score,
)
from .selective import (
    DegenerateTruncationError,
    TruncatedNormal,
    TruncationInterval,
    polyhedral_truncation,
    selective_pvalue,
    selective_threshold,
    truncnorm_cdf,
    truncnorm_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "ComparisonResult",
    "DegenerateTruncationError",
    "DensityModel",
    "DiscrepancyKind",
    "DiscrepancyVector",
    "GaussianRbmSpec",
    "GaussianSpec",
    "KernelSpec",
    "MixtureSpec",
    "PairResult",
    "Problem",
    "RunConfig",
    "SampleModel",
    "TrialMetrics",
    "TruncatedNormal",
    "TruncationInterval",
    "available_problems",
    "by_correction",
    "decision_rates",
    "gaussian_sample",
    "gaussian_score",
    "h_kernel",
    "joint_vector",
    "kolmogorov_uniform",
    "ksd2_u_complete",
    "ksd2_u_linear",
    "ksd_joint_covariance",
    "ksd_linear_covariance",
    "ksd_projection_means",
    "make_problem",
    "median_heuristic",
    "median_kernel_spec",
    "mixture_sample",
    "mixture_score",
    "mmd2_u_complete",
    "mmd2_u_linear",
    "mmd_joint_covariance",
    "mmd_linear_covariance",
    "mmd_projection_means",
    "polyhedral_truncation",
    "rbm_sample",
    "rbm_score",
    "regularize",
    "rel_multi",
    "rel_pair",
    "rel_psi",
    "run_bench",
    "run_calibrate",
    "select_reference",
    "selective_pvalue",
    "selective_threshold",
    "stein_kernel",
    "truncnorm_cdf",
    "truncnorm_quantile",
]
