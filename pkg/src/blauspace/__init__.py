"""Social-network segregation in attribute space.

A population carries demographic attributes; ties form with a
probability driven by a logistic kernel over pairwise feature maps of
those attributes.  From a fitted (or assumed) kernel the package
computes social separation between positions, isolation of individuals,
and population strain; fits the kernel from ego-network case-control
samples with Bayesian inference; validates the inference on synthetic
benchmarks; and embeds populations with classical multidimensional
scaling.  The ``blauspace`` CLI strings these into a file pipeline.
"""

__version__ = "0.1.0"

from .embedding import (
    EmbeddingResult,
    classical_mds,
    conditional_profile,
    kernel_smooth,
    silverman_bandwidth,
)
from .errors import ConfigError, ConvergenceError, NumericError
from .features import (
    AttributeSchema,
    AttributeTable,
    ColumnSpec,
    FeatureConfig,
    FeatureSpec,
    Standardization,
    apply_standardization,
    distance_level,
    evaluate_features,
    evaluate_pair_features,
    fit_standardization,
    standardized_pair_features,
)
from .geosample import (
    GeoSample,
    PolygonRegion,
    format_regions,
    parse_regions,
    sample_control_distance_levels,
    sample_location,
    sample_locations,
)
from .inference import (
    DyadDataset,
    DyadRecord,
    PosteriorResult,
    PrevalenceRatio,
    PriorSpec,
    estimate_prevalence_ratio,
    fit_map,
    laplace_sd,
    log_posterior,
    observed_log_likelihood,
    posterior_median,
    sample_posterior,
    winsorize_weights,
)
from .kernel import KernelParams, SbmSpec, edge_probability, log_odds, logit, sigmoid
from .segregation import (
    SeparationMatrix,
    StrainReport,
    ViolationReport,
    check_metric,
    check_semimetric,
    dispersion_index,
    isolation_profile,
    sbm_isolation,
    sbm_separation,
    sbm_strain,
    separation_matrix,
    social_isolation,
    social_separation,
    social_strain,
)
from .synthgen import (
    CoverageReport,
    SyntheticConfig,
    chi2_quantile,
    chi_squared_statistic,
    coordinate_design,
    generate_network,
    run_coverage,
    sample_ego_dataset,
    simulate_dataset,
)

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "NumericError",
    "AttributeSchema",
    "AttributeTable",
    "ColumnSpec",
    "FeatureConfig",
    "FeatureSpec",
    "Standardization",
    "apply_standardization",
    "distance_level",
    "evaluate_features",
    "evaluate_pair_features",
    "fit_standardization",
    "standardized_pair_features",
    "KernelParams",
    "SbmSpec",
    "edge_probability",
    "log_odds",
    "logit",
    "sigmoid",
    "SeparationMatrix",
    "StrainReport",
    "ViolationReport",
    "check_metric",
    "check_semimetric",
    "dispersion_index",
    "isolation_profile",
    "sbm_isolation",
    "sbm_separation",
    "sbm_strain",
    "separation_matrix",
    "social_isolation",
    "social_separation",
    "social_strain",
    "DyadDataset",
    "DyadRecord",
    "PosteriorResult",
    "PrevalenceRatio",
    "PriorSpec",
    "estimate_prevalence_ratio",
    "fit_map",
    "laplace_sd",
    "log_posterior",
    "observed_log_likelihood",
    "posterior_median",
    "sample_posterior",
    "winsorize_weights",
    "CoverageReport",
    "SyntheticConfig",
    "chi2_quantile",
    "chi_squared_statistic",
    "coordinate_design",
    "generate_network",
    "run_coverage",
    "sample_ego_dataset",
    "simulate_dataset",
    "EmbeddingResult",
    "classical_mds",
    "conditional_profile",
    "kernel_smooth",
    "silverman_bandwidth",
    "GeoSample",
    "PolygonRegion",
    "format_regions",
    "parse_regions",
    "sample_control_distance_levels",
    "sample_location",
    "sample_locations",
]
