"""Projection-then-smooth estimation in truncated Hilbert spaces.

The package approximates a separable Hilbert space by its first J basis
coordinates, estimates the covariance operator's leading eigenspace from
data, and runs kernel density and regression estimation on the projected
coordinates.  A Monte Carlo harness measures how fast estimates built on the
fitted projector converge to the pseudo-estimates built on the exact one.

Modules
-------
hilbert
    Coefficient vectors, quadrature grids, curve file ingestion.
spectral
    Empirical covariance, eigendecomposition, projectors, operator norms.
kernels
    Kernel families, moment constants, small-ball estimation.
estimators
    Partial sums, kernel regression and density, projector-parameterized.
synthetic
    Generators with known spectral truth and closed-form small-ball values.
experiments
    The Monte Carlo harness and rate fitting.
cli
    The ``pcasmooth`` command line.
"""

from . import cli, estimators, experiments, hilbert, kernels, spectral, synthetic
from .estimators import (
    EstimatorConfig,
    RegressionResult,
    RegressionSample,
    kernel_density,
    kernel_regression,
    partial_sum,
    weighted_sum,
)
from .experiments import (
    BandwidthRule,
    ExperimentRow,
    RateFit,
    RunConfig,
    fit_log_log_slope,
    run_all,
    run_density_equivalence,
    run_projector_convergence,
    run_regression_equivalence,
    run_sum_equivalence,
)
from .hilbert import AmbientSpace, CurveGrid, curve_to_coeffs, inner_product, norm
from .kernels import KernelSpec, eval_kernel, kernel, kernel_moment, small_ball_estimate
from .spectral import (
    SpectralDecomposition,
    eigen_localization,
    eigendecompose,
    empirical_covariance,
    hs_norm,
    projector_from,
    spectral_gap,
    sup_norm,
)
from .synthetic import ProcessSpec, RegressionModelSpec, generate_process, generate_regression

__version__ = "0.1.0"

__all__ = [
    "AmbientSpace",
    "BandwidthRule",
    "CurveGrid",
    "EstimatorConfig",
    "ExperimentRow",
    "KernelSpec",
    "ProcessSpec",
    "RateFit",
    "RegressionModelSpec",
    "RegressionResult",
    "RegressionSample",
    "RunConfig",
    "SpectralDecomposition",
    "cli",
    "curve_to_coeffs",
    "eigen_localization",
    "eigendecompose",
    "empirical_covariance",
    "estimators",
    "eval_kernel",
    "experiments",
    "fit_log_log_slope",
    "generate_process",
    "generate_regression",
    "hilbert",
    "hs_norm",
    "inner_product",
    "kernel",
    "kernel_density",
    "kernel_moment",
    "kernel_regression",
    "kernels",
    "norm",
    "partial_sum",
    "projector_from",
    "run_all",
    "run_density_equivalence",
    "run_projector_convergence",
    "run_regression_equivalence",
    "run_sum_equivalence",
    "small_ball_estimate",
    "spectral",
    "spectral_gap",
    "sup_norm",
    "synthetic",
    "weighted_sum",
    "__version__",
]
