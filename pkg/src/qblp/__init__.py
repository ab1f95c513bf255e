"""Quasi-Bayesian local projections.

Impulse-response estimation by local projections with GMM-criterion
quasi-posteriors, roughness-penalty smoothing, elliptical slice and Gibbs
samplers, simultaneous credible bands, and a Monte Carlo harness for
frequentist calibration studies.
"""

__version__ = "0.1.0"

from .bands import (
    BandMethod,
    BandResult,
    PointwiseMode,
    extract_irf_covariance,
    hazen_quantile,
    pointwise_interval,
    supt_plugin,
    supt_quantile,
)
from .data_model import LpDesign, SpecKind, TimeSeriesData, build_design, load_csv
from .dgp import DgpMode, SimResult, VmaParams, build_vma, simulate, true_irf
from .errors import DataError, NumericalError, QblpError
from .estimators import (
    LteGeometry,
    MomentCovKind,
    ThetaMatrix,
    asymptotic_covariance,
    lte_geometry,
    moment_covariance,
    moment_mean,
    muller_sandwich,
    ols,
    tsls,
)
from .montecarlo import (
    ExperimentConfig,
    IvConfig,
    Method,
    MetricsTable,
    SamplerComparison,
    compare_samplers,
    run_experiment,
)
from .posteriors import (
    FlatPrior,
    RoughnessPenalty,
    ags_model_covariance,
    log_pseudo_posterior,
    log_quasi_posterior,
    second_difference_matrix,
)
from .samplers import (
    AcceptStats,
    ChainConfig,
    ThetaDraws,
    effective_sample_size,
    gess_step,
    min_ess,
    run_ags,
    run_gess,
    run_pseudo_gibbs,
)

__all__ = [
    "__version__",
    "AcceptStats",
    "BandMethod",
    "BandResult",
    "ChainConfig",
    "DataError",
    "DgpMode",
    "ExperimentConfig",
    "FlatPrior",
    "IvConfig",
    "LpDesign",
    "LteGeometry",
    "Method",
    "MetricsTable",
    "MomentCovKind",
    "NumericalError",
    "PointwiseMode",
    "QblpError",
    "RoughnessPenalty",
    "SamplerComparison",
    "SimResult",
    "SpecKind",
    "ThetaDraws",
    "ThetaMatrix",
    "TimeSeriesData",
    "VmaParams",
    "ags_model_covariance",
    "asymptotic_covariance",
    "build_design",
    "build_vma",
    "compare_samplers",
    "effective_sample_size",
    "extract_irf_covariance",
    "gess_step",
    "hazen_quantile",
    "lte_geometry",
    "load_csv",
    "log_pseudo_posterior",
    "log_quasi_posterior",
    "min_ess",
    "moment_covariance",
    "moment_mean",
    "muller_sandwich",
    "ols",
    "pointwise_interval",
    "run_ags",
    "run_experiment",
    "run_gess",
    "run_pseudo_gibbs",
    "second_difference_matrix",
    "simulate",
    "supt_plugin",
    "supt_quantile",
    "tsls",
    "true_irf",
]
