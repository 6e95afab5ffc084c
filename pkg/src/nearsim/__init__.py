"""Near-similar tests of the no-mediation hypothesis theta1 * theta2 = 0.

The package provides exact joint densities of ordered absolute
t-statistics, rejection-probability quadrature for boundary tests,
exact similar step tests, numerically optimized varying-g boundaries,
discretized power envelopes, and a three-dimensional extension, plus a
CLI and a small HTTP service around the bounded operations.
"""

from .boundary import (
    GBoundary,
    StepBoundary,
    WeightedBoundary3D,
    exact_similar_boundary,
    load_boundary,
    lr_boundary,
    published_optimal_boundary,
    save_boundary,
)
from .dist import (
    folded_normal_cdf,
    folded_normal_pdf,
    inner_integral,
    noncentrality,
    ordered_abs_pdf2,
    ordered_abs_pdf_k,
)
from .envelope import EnvelopeProblem, cell_probabilities, point_optimal_cr, power_envelope
from .errors import (
    AccuracyError,
    BoundaryInvariantError,
    DomainError,
    InfeasibleConstraintsError,
    InvalidProbabilityError,
    MalformedBoundaryFileError,
    NearsimError,
    NoSimilarTestError,
    NumericError,
    OptimizationError,
    SingularDesignError,
    UndefinedStatisticError,
    UnsupportedDimensionError,
)
from .mediation import (
    MediationData,
    MediationEstimates,
    TestReport,
    g_test,
    g_test_3d,
    lr_test,
    ols_mediation,
    sobel_wald_test,
)
from .optimize import OptimizeConfig, basic_varying_g, optimal_varying_g
from .rp import (
    RPGrid,
    monte_carlo_rp,
    nrp_curve,
    rejection_prob,
    rejection_prob_3d,
    wald_rp,
)
from .runtime import set_worker_count, worker_count

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "BoundaryInvariantError",
    "DomainError",
    "EnvelopeProblem",
    "GBoundary",
    "InfeasibleConstraintsError",
    "InvalidProbabilityError",
    "MalformedBoundaryFileError",
    "MediationData",
    "MediationEstimates",
    "NearsimError",
    "NoSimilarTestError",
    "NumericError",
    "OptimizationError",
    "OptimizeConfig",
    "RPGrid",
    "SingularDesignError",
    "StepBoundary",
    "TestReport",
    "UndefinedStatisticError",
    "UnsupportedDimensionError",
    "WeightedBoundary3D",
    "basic_varying_g",
    "cell_probabilities",
    "exact_similar_boundary",
    "folded_normal_cdf",
    "folded_normal_pdf",
    "g_test",
    "g_test_3d",
    "inner_integral",
    "load_boundary",
    "lr_boundary",
    "lr_test",
    "monte_carlo_rp",
    "noncentrality",
    "nrp_curve",
    "ols_mediation",
    "optimal_varying_g",
    "ordered_abs_pdf2",
    "ordered_abs_pdf_k",
    "point_optimal_cr",
    "power_envelope",
    "published_optimal_boundary",
    "rejection_prob",
    "rejection_prob_3d",
    "save_boundary",
    "sobel_wald_test",
    "set_worker_count",
    "wald_rp",
    "worker_count",
]
