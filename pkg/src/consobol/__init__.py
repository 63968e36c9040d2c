"""Sobol' sensitivity indices for inequality-constrained input domains.

The package estimates main and total variance-based sensitivity indices of
models whose inputs live in a non-rectangular subset of the unit hypercube
cut out by inequality constraints.  Three numerical routes are provided:

* acceptance-rejection Monte Carlo / quasi-Monte Carlo estimators,
* tensor-product trapezoidal grid quadrature with domain bracketing,
* a known-density path for problems where the feasible-domain density and
  its marginals are available in closed form.

See :mod:`consobol.analyzers` for the scikit-learn style front ends and
:mod:`consobol.cli` for the command line.
"""

from .analyzers import MonteCarloSobolAnalyzer, QuadratureSobolAnalyzer
from .benchmarks import (
    OracleResult,
    ReferenceCase,
    oracle_indices,
    reference,
    reference_case_ids,
    references_as_json,
    unconstrained_g_indices,
    unconstrained_k_indices,
)
from .domain import (
    ConstrainedModel,
    ConstrainedPdf,
    ConstraintSet,
    EmptyFeasibleSampleError,
    NonFiniteModelValueError,
    builtin_constraint,
    builtin_model,
    eval_extended,
    indicator,
)
from .estimators import (
    BinPartition,
    EstimatorConfig,
    IndexEstimate,
    KnownPdfIndices,
    PairedDesign,
    binned_main_effect,
    default_bin_count,
    draw_paired_design,
    estimate_mean_variance,
    estimate_scaling,
    full_analysis,
    known_pdf_estimators,
    partition_bins,
    pick_freeze_main_effect,
    pick_freeze_total_effect,
    sample_moments,
)
from .harness import (
    IndexSeries,
    collect_index_series,
    ComparisonSummary,
    ConvergenceReport,
    ExperimentConfig,
    fit_power_trend,
    relative_rmse,
    run_convergence,
    run_estimate,
    run_estimator_comparison,
    run_sweep,
)
from .quadrature import (
    DegenerateVarianceError,
    EmptyDomainAtResolution,
    GridSpec,
    NodeBudgetError,
    QuadratureResult,
    quad_main_effect,
    quad_mean_variance,
    quad_total_effect,
    quadrature_indices,
    sweep_constraint_parameter,
    trapezoid_integrate,
)
from .samplers import (
    BoundingBox,
    DomainNotDetectedError,
    PointStream,
    SampleBatch,
    bracket_domain,
    draw_batch,
    make_batch,
    point_stream,
    sample_triangle,
    sequential_conditional_sample,
    triangle_constrained_pdf,
    triangle_inverse_cdf,
    triangle_inverse_cdfs,
)
from .validation import check_constrained_model, check_unit_points

__version__ = "0.1.0"
