"""Synthetic processes with known spectral structure and regression targets.

The generated process is X_i = sum_j sqrt(lambda_j) xi_ij e_j with the
coordinate axes as eigenvectors, so the true covariance is the diagonal of
the spectrum and the true rank-D projector is the coordinate projector onto
the first D axes.  The truth is written down, never computed by
eigendecomposition; that keeps the harness's reference quantities exact.

For the symmetric-uniform coefficient law the projected law is uniform on a
box, which gives closed-form small-ball probabilities (ball volume minus
spherical caps).  Other laws fall back to empirical estimates upstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import betainc, gammaln

from .estimators import RegressionSample
from .spectral import SpectralDecomposition

__all__ = [
    "COEFFICIENT_LAWS",
    "ProcessSpec",
    "geometric_spectrum",
    "coefficient_bound",
    "generate_process",
    "norm_bound",
    "support_half_widths",
    "true_decomposition",
    "true_projector",
    "unit_ball_volume",
    "has_exact_small_ball",
    "projected_small_ball",
    "RegressionTarget",
    "register_target",
    "get_target",
    "target_names",
    "RegressionModelSpec",
    "target_values",
    "generate_regression",
    "draw_anchors",
]

COEFFICIENT_LAWS = ("uniform_sym", "rademacher_smoothed")

# Half-width of the standardized uniform law U[-sqrt(3), sqrt(3)].
_UNIFORM_HALF_WIDTH = np.sqrt(3.0)
# Standard deviation of sign + U[-1/2, 1/2]; dividing by it standardizes the law.
_RS_SCALE = np.sqrt(13.0 / 12.0)


@dataclass(frozen=True)
class ProcessSpec:
    """Mean-zero process with a declared spectrum and coefficient law.

    ``spectrum`` must be strictly decreasing and positive: ties would leave
    the rank-D eigenspaces ill-defined and the whole harness compares
    against those spaces.  Both built-in laws have mean 0, variance 1,
    bounded support and no atoms.
    """

    J: int
    spectrum: tuple[float, ...]
    coefficient_law: str = "uniform_sym"
    seed: int = 0

    def __post_init__(self) -> None:
        if not (isinstance(self.J, (int, np.integer)) and self.J >= 3):
            raise ValueError(f"process dimension J must be an integer >= 3, got {self.J!r}")
        lam = tuple(float(v) for v in self.spectrum)
        if len(lam) != self.J:
            raise ValueError(f"spectrum has {len(lam)} entries but J = {self.J}")
        for j, v in enumerate(lam):
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"spectrum entry {j} must be positive and finite, got {v!r}")
        for j in range(1, len(lam)):
            if lam[j] >= lam[j - 1]:
                raise ValueError(
                    f"spectrum must be strictly decreasing; entry {j} = {lam[j]!r} "
                    f">= entry {j - 1} = {lam[j - 1]!r}"
                )
        if self.coefficient_law not in COEFFICIENT_LAWS:
            raise ValueError(
                f"unknown coefficient law {self.coefficient_law!r}; valid laws: {', '.join(COEFFICIENT_LAWS)}"
            )
        if not isinstance(self.seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {type(self.seed).__name__}")
        if not 0 <= self.seed < 2 ** 63:
            raise ValueError(f"seed must lie in [0, 2**63), got {self.seed}")
        object.__setattr__(self, "spectrum", lam)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.asarray(self.spectrum)


def geometric_spectrum(J: int, ratio: float = 0.5, scale: float = 1.0) -> tuple[float, ...]:
    """Spectrum ``scale * ratio**j`` for j = 0..J-1."""
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return tuple(scale * ratio ** j for j in range(J))


def coefficient_bound(law: str) -> float:
    """Almost-sure bound on |xi| for a coefficient law."""
    if law == "uniform_sym":
        return float(_UNIFORM_HALF_WIDTH)
    if law == "rademacher_smoothed":
        return float(1.5 / _RS_SCALE)
    raise ValueError(f"unknown coefficient law {law!r}; valid laws: {', '.join(COEFFICIENT_LAWS)}")


def _resolve_rng(spec_seed: int, seed) -> np.random.Generator:
    # Counter-based generator so per-replication streams can be derived by
    # key arithmetic without overlap; an existing Generator passes through
    # so one replication can consume a single stream in a fixed order.
    if seed is None:
        return np.random.Generator(np.random.Philox(key=spec_seed))
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _draw_coefficients(law: str, rng: np.random.Generator, shape) -> np.ndarray:
    if law == "uniform_sym":
        return rng.uniform(-_UNIFORM_HALF_WIDTH, _UNIFORM_HALF_WIDTH, shape)
    if law == "rademacher_smoothed":
        signs = rng.integers(0, 2, shape) * 2 - 1
        return (signs + rng.uniform(-0.5, 0.5, shape)) / _RS_SCALE
    raise ValueError(f"unknown coefficient law {law!r}")


def generate_process(spec: ProcessSpec, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` coefficient vectors of the process as an ``(n, J)`` array.

    ``seed`` may be an integer key, an existing ``numpy.random.Generator``
    (consumed in place), or None to use the spec's own seed.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ValueError(f"sample size must be an integer >= 1, got {n!r}")
    rng = _resolve_rng(spec.seed, seed)
    xi = _draw_coefficients(spec.coefficient_law, rng, (int(n), spec.J))
    return xi * np.sqrt(spec.eigenvalues)[None, :]


def norm_bound(spec: ProcessSpec) -> float:
    """Almost-sure norm bound sum_j bound * sqrt(lambda_j) (triangle inequality)."""
    return float(coefficient_bound(spec.coefficient_law) * np.sum(np.sqrt(spec.eigenvalues)))


def support_half_widths(spec: ProcessSpec) -> np.ndarray:
    """Per-coordinate support half-widths bound * sqrt(lambda_j), shape (J,)."""
    return coefficient_bound(spec.coefficient_law) * np.sqrt(spec.eigenvalues)


def true_decomposition(spec: ProcessSpec) -> SpectralDecomposition:
    """Exact spectral decomposition of the process covariance (written down)."""
    return SpectralDecomposition(spec.eigenvalues, np.eye(spec.J))


def true_projector(spec: ProcessSpec, D: int) -> np.ndarray:
    """Exact rank-D projector: the coordinate projector onto the first D axes."""
    if not 1 <= D < spec.J:
        raise ValueError(f"projection dimension must satisfy 1 <= D < {spec.J}, got {D}")
    return np.diag((np.arange(spec.J) < D).astype(float))


# Closed-form small-ball values (uniform law only) ------------------------


def unit_ball_volume(dim: int) -> float:
    """Volume of the Euclidean unit ball in ``dim`` dimensions."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    return float(np.exp(0.5 * dim * np.log(np.pi) - gammaln(0.5 * dim + 1.0)))


def _cap_fraction(dim: int, t: float) -> float:
    # Fraction of unit-ball volume cut off by a hyperplane at distance t from
    # the center, 0 <= t <= 1.
    return float(0.5 * betainc(0.5 * (dim + 1), 0.5, 1.0 - t * t))


def has_exact_small_ball(spec: ProcessSpec) -> bool:
    """Whether :func:`projected_small_ball` supports this process."""
    return spec.coefficient_law == "uniform_sym"


def projected_small_ball(spec: ProcessSpec, D: int, center, h: float) -> float:
    """Exact probability that the projected process lands within ``h`` of ``center``.

    Only for the symmetric-uniform law, whose projected density is the
    constant ``prod_j 1/(2 a_j)`` on the box of half-widths
    ``a_j = sqrt(3 lambda_j)``, j < D.  The probability is the constant times
    the ball volume, minus one spherical-cap volume per box face closer than
    ``h``.  Caps must not overlap pairwise (checked); radii that violate
    this need an empirical estimate instead.
    """
    if not has_exact_small_ball(spec):
        raise ValueError(
            f"no closed-form small-ball values for law {spec.coefficient_law!r}; "
            "use an empirical estimate"
        )
    if not 1 <= D < spec.J:
        raise ValueError(f"projection dimension must satisfy 1 <= D < {spec.J}, got {D}")
    if not h > 0:
        raise ValueError(f"radius must be positive, got {h!r}")
    c = np.asarray(center, dtype=float).ravel()
    if c.size == spec.J:
        c = c[:D]
    if c.size != D:
        raise ValueError(f"center must have length {D} (or {spec.J}), got {c.size}")

    half = support_half_widths(spec)[:D]
    # Distances to the 2D box faces; nonpositive means the center is outside.
    face_dists = np.concatenate([half - c, half + c])
    if np.any(face_dists <= 0):
        raise ValueError("center lies outside the support box of the projected law")

    density = float(np.prod(1.0 / (2.0 * half)))
    active = np.sort(face_dists[face_dists < h])
    if active.size >= 2 and active[0] ** 2 + active[1] ** 2 < h * h:
        raise ValueError(
            f"radius {h!r} too large for the closed form: spherical caps at face distances "
            f"{active[0]!r} and {active[1]!r} overlap"
        )
    ball = unit_ball_volume(D) * h ** D
    fraction = 1.0 - sum(_cap_fraction(D, float(d) / h) for d in active)
    value = density * ball * fraction
    if not 0.0 < value <= 1.0:
        raise ValueError(f"computed small-ball value {value!r} outside (0, 1]; geometry invalid")
    return value


# Regression targets ------------------------------------------------------


@dataclass(frozen=True)
class RegressionTarget:
    """Named Lipschitz function of the leading projected coordinates.

    ``fn`` maps ``(..., dim)`` projected coordinates to values; the two
    bound callables report a Lipschitz constant and a sup-norm bound over a
    box of given half-widths, used for certified response bounds.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    min_dim: int
    lipschitz_on: Callable[[np.ndarray], float]
    sup_abs_on: Callable[[np.ndarray], float]

    def __call__(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if Z.shape[-1] < self.min_dim:
            raise ValueError(f"target {self.name!r} needs at least {self.min_dim} coordinates, got {Z.shape[-1]}")
        return np.asarray(self.fn(Z), dtype=float)


_TARGETS: dict[str, RegressionTarget] = {}


def register_target(target: RegressionTarget) -> None:
    _TARGETS[target.name] = target


def get_target(name: str) -> RegressionTarget:
    if name not in _TARGETS:
        raise ValueError(f"unknown regression target {name!r}; valid targets: {', '.join(sorted(_TARGETS))}")
    return _TARGETS[name]


def target_names() -> tuple[str, ...]:
    return tuple(sorted(_TARGETS))


register_target(RegressionTarget(
    name="sine_quad",
    fn=lambda Z: 1.0 + np.sin(Z[..., 0]) + Z[..., 1] ** 2 / 4.0,
    min_dim=2,
    lipschitz_on=lambda a: float(np.hypot(1.0, float(a[1]) / 2.0)),
    sup_abs_on=lambda a: float(2.0 + float(a[1]) ** 2 / 4.0),
))

register_target(RegressionTarget(
    name="constant",
    fn=lambda Z: np.ones(Z.shape[:-1]),
    min_dim=1,
    lipschitz_on=lambda a: 0.0,
    sup_abs_on=lambda a: 1.0,
))


@dataclass(frozen=True)
class RegressionModelSpec:
    """Regression target, projection dimension of the truth, and noise width.

    Noise is uniform on [-noise_halfwidth, noise_halfwidth]: bounded, mean
    zero, independent of the predictors.
    """

    target: str = "sine_quad"
    noise_halfwidth: float = 0.25
    D_true: int = 3

    def __post_init__(self) -> None:
        tgt = get_target(self.target)  # raises for unknown names
        if not (np.isfinite(self.noise_halfwidth) and self.noise_halfwidth >= 0):
            raise ValueError(f"noise half-width must be >= 0, got {self.noise_halfwidth!r}")
        if not (isinstance(self.D_true, (int, np.integer)) and self.D_true >= tgt.min_dim):
            raise ValueError(
                f"target {self.target!r} needs D_true >= {tgt.min_dim}, got {self.D_true!r}"
            )


def target_values(model: RegressionModelSpec, predictors, projector) -> np.ndarray:
    """True regression values r(P x) for each predictor row.

    The target reads the first ``D_true`` coordinates of the projected
    predictor; with the synthetic truth the projector is coordinate-aligned,
    so those are the leading eigen-coordinates.
    """
    X = np.asarray(predictors, dtype=float)
    P = np.asarray(projector, dtype=float)
    Z = (X @ P)[..., : model.D_true]
    return get_target(model.target)(Z)


def generate_regression(predictors, model: RegressionModelSpec, projector, seed,
                        support_half_widths=None) -> RegressionSample:
    """Attach noisy responses to a predictor sample.

    ``seed`` follows the same convention as :func:`generate_process`.  When
    the per-coordinate ``support_half_widths`` of the predictor law are
    supplied, the recorded response bound is the analytic sup of the target
    over the support plus the noise half-width; otherwise it falls back to
    the realized maximum, which still bounds every recorded response.
    """
    X = np.asarray(predictors, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"predictors must be a nonempty (n, J) array, got shape {X.shape}")
    rng = _resolve_rng(0, seed)
    r = target_values(model, X, projector)
    w = float(model.noise_halfwidth)
    Y = r + rng.uniform(-w, w, X.shape[0])
    if support_half_widths is not None:
        a = np.asarray(support_half_widths, dtype=float)[: model.D_true]
        bound = get_target(model.target).sup_abs_on(a) + w
    else:
        bound = float(np.max(np.abs(r))) + w
    return RegressionSample(X, Y, response_bound=bound)


def draw_anchors(spec: ProcessSpec, count: int, D: int, h_margin: float, seed,
                 model: RegressionModelSpec | None = None, min_target_abs: float = 0.1,
                 batch: int = 512, max_batches: int = 200) -> np.ndarray:
    """Draw anchor points from the process law, filtered for usability.

    Accepted anchors keep a margin of at least ``h_margin`` to every face of
    the projected support box (so a ball of that radius stays inside the
    support, which keeps normalizers positive and the closed-form values
    exact), and, when ``model`` is given, have |target| >= ``min_target_abs``
    so that relative regression errors are well scaled.

    Draws i.i.d. candidates in batches from one stream, so results are
    deterministic in the seed; raises if acceptance is too low.
    """
    if not (isinstance(count, (int, np.integer)) and count >= 1):
        raise ValueError(f"anchor count must be an integer >= 1, got {count!r}")
    if not 1 <= D < spec.J:
        raise ValueError(f"projection dimension must satisfy 1 <= D < {spec.J}, got {D}")
    if h_margin < 0:
        raise ValueError(f"margin must be >= 0, got {h_margin!r}")
    rng = _resolve_rng(spec.seed, seed)
    half = support_half_widths(spec)[:D]
    if np.any(half <= h_margin):
        tight = int(np.argmin(half))
        raise ValueError(
            f"margin {h_margin!r} leaves no interior: projected coordinate {tight} has "
            f"support half-width {float(half[tight])!r}"
        )
    P_true = true_projector(spec, max(D, model.D_true)) if model is not None else None

    kept: list[np.ndarray] = []
    have = 0
    for _ in range(max_batches):
        cand = generate_process(spec, batch, seed=rng)
        ok = np.all(half[None, :] - np.abs(cand[:, :D]) >= h_margin, axis=1)
        if model is not None:
            ok &= np.abs(target_values(model, cand, P_true)) >= min_target_abs
        if ok.any():
            kept.append(cand[ok])
            have += int(ok.sum())
        if have >= count:
            return np.vstack(kept)[:count]
    raise RuntimeError(
        f"could not draw {count} anchors after {max_batches * batch} candidates; "
        f"margin {h_margin!r} or target threshold {min_target_abs!r} rejects too much"
    )
