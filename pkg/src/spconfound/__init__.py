"""Spatial-confounding bias analysis toolkit.

Simulates correlated exposure/confounder Gaussian random fields,
evaluates closed-form confounding biases, builds principal
kriging/spline bases, fits Bayesian spike-and-slab reduced-rank
spatial regressions alongside classical competitors, and benchmarks
them on a factorial grid of spatial ranges.
"""

from .geometry import (
    ExpCorrelation,
    Location,
    SiteSet,
    SqrtMethod,
    correlation_matrix,
    distance_matrix,
    matrix_sqrt,
    tps_kernel,
)
from .simulate import (
    ConditionalLaw,
    ConfoundingScenario,
    FieldReplicate,
    calibrate_sigma_w,
    conditional_law,
    replicate_seed,
    sample_exposure,
    sample_replicate,
    sample_sites,
)
from .basis import (
    NullSpaceType,
    PrincipalBasis,
    TprsBasis,
    build_blocks,
    evaluate_pkf,
    principal_kriging_basis,
    tprs_basis,
)
from .bias import (
    BiasCurve,
    BiasReport,
    bias_curve,
    bias_report,
    d_x,
    d_x_star,
    delta_gls,
    delta_ols,
)
from .ssreg import (
    ChainSummary,
    ModelState,
    PosteriorChain,
    PriorFamily,
    SsPriorConfig,
    StandardizationRecord,
    gibbs_fv,
    gibbs_nmig,
    standardize,
    summarize,
)
from .ssmom import enumerate_models, mom_sampler
from .competitors import (
    FitResult,
    MethodId,
    SreConfig,
    fit_ols,
    fit_spline_family,
    fit_sre,
)
from .benchmark import (
    BenchmarkTable,
    StudyConfig,
    desk_preset,
    edf_summary,
    paper_preset,
    probability_summaries,
    run_study,
)
from .application import AppReport, ObservationTable, derive_rh, ingest, run_application
from . import errors

__version__ = "0.1.0"
