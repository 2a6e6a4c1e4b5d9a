"""Continuous-time stochastic reserving for run-off triangles.

The package splits a claims development triangle into new-claims amounts
and revisions of previously reported amounts, models the cumulative
reported amount as a square-root diffusion fed by compound-Poisson
arrivals, and estimates the predictive distribution of the outstanding
reserve by exact-path bootstrap simulation plus three reference methods
(Pearson-residual bootstrap, a time-series bootstrap, and moment-matched
closed forms).
"""

from .bootstrap import (
    INFEASIBLE_POLICIES,
    LOGNORMAL_PARAMS,
    MATCHED_FAMILIES,
    BootstrapConfig,
    Diagnostics,
    MatchedDistribution,
    ReserveDistribution,
    ct_bootstrap,
    moment_matched,
    residual_bootstrap,
    summarize,
    timeseries_bootstrap,
)
from .calibration import (
    CtParams,
    GammaJumpLaw,
    InfeasibleError,
    RegressionReport,
    ct_to_discrete,
    discrete_to_ct,
    estimate_moment_ratio,
    fit_jump_gamma,
    variance_link,
)
from .datasets import schnieper_dataset
from .estimators import (
    TAIL_VARIANCE_RULES,
    DiscreteParams,
    conditional_moments,
    estimate_discrete,
    ultimate_and_reserve,
)
from .reporting import (
    METHODS,
    CalibrationResult,
    ConfigError,
    RunArtifacts,
    RunConfig,
    calibrate,
    load_claims_data,
    parse_triangle_csv,
    read_exposure_csv,
    run_report,
    write_triangle_csv,
)
from .rng import (
    CompoundPoissonExpParams,
    RngStream,
    sample_compound_poisson_exp,
    sample_poisson_times,
)
from .simulation import (
    AbsorptionRecord,
    DeterministicBranch,
    TriangleCompletion,
    YearTransition,
    absorption_bounds,
    absorption_scan,
    branch_law,
    sample_branch,
    simulate_lower_triangle,
    simulate_year,
    simulate_year_jumpwise,
)
from .triangle import (
    ClaimsData,
    DataError,
    Triangle,
    build_cumulative,
    decompose_cumulative,
    observed_mask,
)

__version__ = "0.1.0"

__all__ = [
    "AbsorptionRecord",
    "BootstrapConfig",
    "CalibrationResult",
    "ClaimsData",
    "CompoundPoissonExpParams",
    "ConfigError",
    "CtParams",
    "DataError",
    "DeterministicBranch",
    "Diagnostics",
    "DiscreteParams",
    "GammaJumpLaw",
    "INFEASIBLE_POLICIES",
    "InfeasibleError",
    "LOGNORMAL_PARAMS",
    "MATCHED_FAMILIES",
    "METHODS",
    "MatchedDistribution",
    "RegressionReport",
    "ReserveDistribution",
    "RngStream",
    "RunArtifacts",
    "RunConfig",
    "TAIL_VARIANCE_RULES",
    "Triangle",
    "TriangleCompletion",
    "YearTransition",
    "absorption_bounds",
    "absorption_scan",
    "branch_law",
    "build_cumulative",
    "calibrate",
    "conditional_moments",
    "ct_bootstrap",
    "ct_to_discrete",
    "decompose_cumulative",
    "discrete_to_ct",
    "estimate_discrete",
    "estimate_moment_ratio",
    "fit_jump_gamma",
    "load_claims_data",
    "moment_matched",
    "observed_mask",
    "parse_triangle_csv",
    "read_exposure_csv",
    "residual_bootstrap",
    "run_report",
    "sample_branch",
    "sample_compound_poisson_exp",
    "sample_poisson_times",
    "schnieper_dataset",
    "simulate_lower_triangle",
    "simulate_year",
    "simulate_year_jumpwise",
    "summarize",
    "timeseries_bootstrap",
    "ultimate_and_reserve",
    "variance_link",
    "write_triangle_csv",
]
