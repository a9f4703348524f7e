"""Smoothing kernels on [0, infinity) and small-ball probability tools.

Kernels here are functions of the *nonnegative* scaled distance v = d/h, not
of a signed coordinate; negative arguments are a caller bug and are rejected.
The moment ``dim * integral_0^1 v^(dim-1) K(v)^power dv`` is the constant
that turns raw in-window counts into density-normalizer units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

__all__ = [
    "FAMILIES",
    "KernelSpec",
    "kernel",
    "eval_kernel",
    "kernel_moment",
    "SmallBallCurve",
    "small_ball_estimate",
    "regular_variation_ratio",
    "rv_index_estimate",
]

FAMILIES = ("naive", "epanechnikov", "gaussian")


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus the support/smoothness facts estimators rely on.

    ``compact_support`` means the kernel vanishes outside [0, 1];
    ``continuously_differentiable`` means C^1 on the closed support, in which
    case ``lipschitz_constant`` bounds |K'|.
    """

    family: str
    compact_support: bool
    continuously_differentiable: bool
    lipschitz_constant: float | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; valid families: {', '.join(FAMILIES)}")
        if self.lipschitz_constant is not None and self.lipschitz_constant <= 0:
            raise ValueError(f"lipschitz constant must be positive, got {self.lipschitz_constant}")


def kernel(family: str) -> KernelSpec:
    """Look up a built-in kernel family by name."""
    if family == "naive":
        # Indicator of [0, 1]: compactly supported, discontinuous at 1.
        return KernelSpec("naive", compact_support=True, continuously_differentiable=False)
    if family == "epanechnikov":
        # (1 - v^2)_+ with |K'| <= 2 on [0, 1].
        return KernelSpec("epanechnikov", compact_support=True, continuously_differentiable=True,
                          lipschitz_constant=2.0)
    if family == "gaussian":
        # exp(-v^2/2): supported on all of [0, inf), |K'| peaks at exp(-1/2).
        return KernelSpec("gaussian", compact_support=False, continuously_differentiable=True,
                          lipschitz_constant=float(np.exp(-0.5)))
    raise ValueError(f"unknown kernel family {family!r}; valid families: {', '.join(FAMILIES)}")


def eval_kernel(spec: KernelSpec, v):
    """Evaluate the kernel at scaled distances ``v >= 0``.

    Accepts scalars or arrays; negative arguments are rejected because a
    distance can never be negative and a silent abs() would hide the bug.
    """
    arr = np.asarray(v, dtype=float)
    if np.any(arr < 0):
        bad = float(arr.ravel()[np.flatnonzero(arr.ravel() < 0)[0]])
        raise ValueError(f"kernel argument must be nonnegative, got {bad}")
    if spec.family == "naive":
        out = (arr <= 1.0).astype(float)
    elif spec.family == "epanechnikov":
        out = np.maximum(0.0, 1.0 - arr * arr)
    elif spec.family == "gaussian":
        out = np.exp(-0.5 * arr * arr)
    else:  # unreachable for validated specs
        raise ValueError(f"unknown kernel family {spec.family!r}")
    return float(out) if np.isscalar(v) else out


def kernel_moment(spec: KernelSpec, dim: int, power: int) -> float:
    """Moment ``dim * integral_0^1 v^(dim-1) K(v)^power dv``.

    For the naive kernel this is exactly 1 for every ``dim`` and ``power``.
    Quadrature is accurate to well below 1e-10 for the built-in families.
    """
    if not (isinstance(dim, (int, np.integer)) and dim >= 1):
        raise ValueError(f"dim must be an integer >= 1, got {dim!r}")
    if not (isinstance(power, (int, np.integer)) and power >= 1):
        raise ValueError(f"power must be an integer >= 1, got {power!r}")

    def integrand(t: float) -> float:
        return t ** (dim - 1) * eval_kernel(spec, t) ** power

    value, err = quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    if err > 1e-10:
        raise RuntimeError(f"kernel moment quadrature error {err:.2e} above 1e-10")
    return float(dim * value)


@dataclass(frozen=True)
class SmallBallCurve:
    """Empirical mass of closed projected balls around an anchor, by radius.

    ``values[k]`` is the fraction of the sample whose projection lies within
    ``radii[k]`` of the projected anchor; monotone in the radius by
    construction.
    """

    anchor: np.ndarray
    projector: np.ndarray
    radii: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        anchor = np.asarray(self.anchor, dtype=float)
        proj = np.asarray(self.projector, dtype=float)
        radii = np.asarray(self.radii, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if radii.ndim != 1 or radii.size == 0:
            raise ValueError("radii must be a nonempty 1-d array")
        if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
            raise ValueError("radii must be positive and strictly increasing")
        if values.shape != radii.shape:
            raise ValueError(f"values shape {values.shape} does not match radii shape {radii.shape}")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("small-ball values must lie in [0, 1]")
        if np.any(np.diff(values) < 0):
            raise ValueError("small-ball values must be nondecreasing in the radius")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "projector", proj)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)


def small_ball_estimate(sample, x, projector, radii) -> SmallBallCurve:
    """Estimate the projected small-ball function at ``x`` on a radius grid.

    Balls are closed: a point exactly on the boundary counts.  ``sample`` is
    ``(n, J)``, ``projector`` a symmetric ``(J, J)`` projector, ``radii`` a
    strictly increasing positive grid.
    """
    X = np.asarray(sample, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"sample must be a nonempty (n, J) array, got shape {X.shape}")
    anchor = np.asarray(x, dtype=float)
    P = np.asarray(projector, dtype=float)
    dists = np.sort(np.linalg.norm((anchor - X) @ P, axis=1))
    grid = np.asarray(radii, dtype=float)
    counts = np.searchsorted(dists, grid, side="right")
    return SmallBallCurve(anchor, P, grid, counts / X.shape[0])


def regular_variation_ratio(curve: SmallBallCurve, s: float, u: float) -> float:
    """Ratio F(s*u)/F(s) interpolated from an estimated small-ball curve.

    For a projected law that is regularly varying of index ``dim`` at the
    anchor, this ratio tends to ``u**dim`` as ``s`` shrinks, which is the
    diagnostic callers compare against.  Both ``s`` and ``s*u`` must lie
    inside the radius grid, and ``F(s)`` must be positive.
    """
    if not (s > 0 and u > 0):
        raise ValueError(f"scale s and factor u must be positive, got s={s}, u={u}")
    lo, hi = float(curve.radii[0]), float(curve.radii[-1])
    for name, r in (("s", s), ("s*u", s * u)):
        if not lo <= r <= hi:
            raise ValueError(f"radius {name} = {r!r} outside the estimated range [{lo!r}, {hi!r}]")
    base = float(np.interp(s, curve.radii, curve.values))
    if base == 0.0:
        raise ValueError(
            f"estimated small-ball mass at s = {s!r} is zero; "
            f"the radius grid is too fine for the sample size"
        )
    return float(np.interp(s * u, curve.radii, curve.values)) / base


def rv_index_estimate(curve: SmallBallCurve) -> float:
    """Log-log slope of the small-ball curve over radii with positive mass.

    Estimates the local regular-variation index; near the origin of a
    ``dim``-dimensional projected law with positive density it approaches
    ``dim``.
    """
    mask = curve.values > 0
    if mask.sum() < 2:
        raise ValueError("need at least 2 radii with positive estimated mass")
    slope = np.polyfit(np.log(curve.radii[mask]), np.log(curve.values[mask]), 1)[0]
    return float(slope)
