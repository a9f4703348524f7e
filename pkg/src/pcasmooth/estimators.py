"""Kernel sums, regression and density estimates on projected data.

Every estimator takes the projector as an argument.  Feeding the empirical
projector gives the practical estimate; feeding the true projector gives the
pseudo-estimate that the Monte Carlo harness compares against.  Both run
through the same code path on purpose: any systematic difference between the
two must come from the projector, never from the implementation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from .kernels import KernelSpec, eval_kernel

__all__ = [
    "EstimatorConfig",
    "RegressionSample",
    "RegressionResult",
    "projected_distances",
    "partial_sum",
    "partial_sums",
    "weighted_sum",
    "weighted_sums",
    "kernel_regression",
    "kernel_regressions",
    "kernel_density",
    "kernel_densities",
]


@dataclass(frozen=True)
class EstimatorConfig:
    """Projection dimension, bandwidth and kernel shared by one estimation pass."""

    D: int
    bandwidth: float
    kernel: KernelSpec

    def __post_init__(self) -> None:
        if not (isinstance(self.D, (int, np.integer)) and self.D >= 1):
            raise ValueError(f"projection dimension D must be an integer >= 1, got {self.D!r}")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be positive and finite, got {self.bandwidth!r}")
        if not isinstance(self.kernel, KernelSpec):
            raise TypeError(f"kernel must be a KernelSpec, got {type(self.kernel).__name__}")
        if self.D <= 2:
            warnings.warn(
                f"projection dimension D={self.D} <= 2: estimates are well defined, but the "
                "estimate/pseudo-estimate equivalence guarantees need D > 2",
                stacklevel=2,
            )


@dataclass(frozen=True)
class RegressionSample:
    """Predictors with responses, plus an optional certified response bound."""

    predictors: np.ndarray
    responses: np.ndarray
    response_bound: float | None = None

    def __post_init__(self) -> None:
        X = np.asarray(self.predictors, dtype=float)
        Y = np.asarray(self.responses, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"predictors must be an (n, J) array, got shape {X.shape}")
        if Y.ndim != 1 or Y.size != X.shape[0]:
            raise ValueError(
                f"responses must be a length-{X.shape[0]} vector, got shape {Y.shape}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("sample has non-finite entries")
        if self.response_bound is not None:
            bound = float(self.response_bound)
            worst = int(np.argmax(np.abs(Y))) if Y.size else 0
            if Y.size and abs(Y[worst]) > bound:
                raise ValueError(
                    f"response {worst} has |value| {float(abs(Y[worst]))!r} above the declared bound {bound!r}"
                )
        object.__setattr__(self, "predictors", X)
        object.__setattr__(self, "responses", Y)

    @property
    def n(self) -> int:
        return self.predictors.shape[0]


class RegressionResult(NamedTuple):
    """Regression value with a machine-readable empty-window flag."""

    value: float
    empty_window: bool


def projected_distances(sample, anchors, projector) -> np.ndarray:
    """Distances ``||P(x_a - X_i)||`` as an ``(A, n)`` matrix."""
    X = np.asarray(sample, dtype=float)
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    P = np.asarray(projector, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"sample must be a nonempty (n, J) array, got shape {X.shape}")
    if A.shape[1] != X.shape[1]:
        raise ValueError(f"anchors have dimension {A.shape[1]} but sample has {X.shape[1]}")
    if P.shape != (X.shape[1], X.shape[1]):
        raise ValueError(f"projector shape {P.shape} does not match dimension {X.shape[1]}")
    return cdist(A @ P, X @ P)


def _weights(sample, anchors, projector, config: EstimatorConfig) -> np.ndarray:
    """Kernel weights K(||P(x_a - X_i)|| / h) as an (A, n) matrix."""
    dists = projected_distances(sample, anchors, projector)
    return eval_kernel(config.kernel, dists / config.bandwidth)


def partial_sums(sample, anchors, projector, config: EstimatorConfig) -> np.ndarray:
    """Sum of kernel weights per anchor; the shared denominator statistic.

    Nonnegative, at most ``n``, and monotone in the bandwidth for the
    built-in (nonincreasing) kernels.
    """
    return _weights(sample, anchors, projector, config).sum(axis=1)


def partial_sum(sample, x, projector, config: EstimatorConfig) -> float:
    """Single-anchor version of :func:`partial_sums`."""
    return float(partial_sums(sample, np.asarray(x, dtype=float)[None, :], projector, config)[0])


def weighted_sums(sample: RegressionSample, anchors, projector, config: EstimatorConfig) -> np.ndarray:
    """Response-weighted kernel sums per anchor; the regression numerator."""
    if not isinstance(sample, RegressionSample):
        raise TypeError(f"sample must be a RegressionSample, got {type(sample).__name__}")
    K = _weights(sample.predictors, anchors, projector, config)
    return K @ sample.responses


def weighted_sum(sample: RegressionSample, x, projector, config: EstimatorConfig) -> float:
    """Single-anchor version of :func:`weighted_sums`."""
    return float(weighted_sums(sample, np.asarray(x, dtype=float)[None, :], projector, config)[0])


def kernel_regressions(sample: RegressionSample, anchors, projector, config: EstimatorConfig):
    """Kernel regression values and empty-window flags per anchor.

    An anchor whose kernel window holds no sample mass gets value 0.0 and
    ``empty_window=True``; the zero is a reporting convention, not an
    estimate, and callers that aggregate must consult the flag.

    Returns ``(values, empty)`` with shapes ``(A,)``.
    """
    if not isinstance(sample, RegressionSample):
        raise TypeError(f"sample must be a RegressionSample, got {type(sample).__name__}")
    K = _weights(sample.predictors, anchors, projector, config)
    denom = K.sum(axis=1)
    numer = K @ sample.responses
    empty = ~(denom > 0)
    values = np.where(empty, 0.0, numer / np.where(empty, 1.0, denom))
    return values, empty


def kernel_regression(sample: RegressionSample, x, projector, config: EstimatorConfig) -> RegressionResult:
    """Single-anchor kernel regression with its empty-window flag.

    With a nonnegative kernel the value is a convex combination of
    responses, so it never exceeds ``max |Y_i|`` in magnitude.
    """
    values, empty = kernel_regressions(sample, np.asarray(x, dtype=float)[None, :], projector, config)
    return RegressionResult(float(values[0]), bool(empty[0]))


def kernel_densities(sample, anchors, projector, config: EstimatorConfig) -> np.ndarray:
    """Projected density estimates: partial sums over ``n * h**D``."""
    X = np.asarray(sample, dtype=float)
    sums = partial_sums(X, anchors, projector, config)
    return sums / (X.shape[0] * config.bandwidth ** config.D)


def kernel_density(sample, x, projector, config: EstimatorConfig) -> float:
    """Single-anchor version of :func:`kernel_densities`."""
    return float(kernel_densities(sample, np.asarray(x, dtype=float)[None, :], projector, config)[0])
