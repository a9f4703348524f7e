"""Coefficient-space model of a truncated separable Hilbert space.

Everything downstream works on real coefficient vectors of a fixed length
``J`` taken against one orthonormal basis per run.  This module supplies the
vector primitives (inner product, norm), quadrature grids for tabulated
curves, an orthonormal Fourier basis on [0, 1), and the projection of raw
curve samples onto basis coefficients, together with a plain-text curve file
format for ingestion and export.

Coefficient vectors from different bases must never be mixed; the basis is
fixed once per run and carried implicitly by the ambient space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AmbientSpace",
    "CurveGrid",
    "as_vector",
    "inner_product",
    "norm",
    "fourier_basis",
    "curve_to_coeffs",
    "write_curves",
    "read_curves",
]


@dataclass(frozen=True)
class AmbientSpace:
    """Truncation of the separable space to ``J`` basis coordinates.

    Parameters
    ----------
    J : int
        Number of retained basis coordinates.  Must be at least 3 so that a
        nontrivial projection dimension ``1 <= D < J`` with ``D > 2`` exists.
    description : str
        Free-form note on which basis the coordinates refer to.
    """

    J: int
    description: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.J, (int, np.integer)):
            raise TypeError(f"ambient dimension J must be an integer, got {type(self.J).__name__}")
        if self.J < 3:
            raise ValueError(f"ambient dimension J must be >= 3, got {self.J}")


def as_vector(u, J: int | None = None) -> np.ndarray:
    """Validate and return ``u`` as a 1-d float64 coefficient vector.

    Rejects non-finite entries and, when ``J`` is given, wrong lengths.
    """
    v = np.asarray(u, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"coefficient vector must be 1-d, got shape {v.shape}")
    if v.size == 0:
        raise ValueError("coefficient vector must be nonempty")
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(v))[0])
        raise ValueError(f"coefficient vector has non-finite entry at index {bad}")
    if J is not None and v.size != J:
        raise ValueError(f"coefficient vector has length {v.size}, expected {J}")
    return v


def inner_product(u, v) -> float:
    """Euclidean inner product of two coefficient vectors.

    Under an orthonormal basis this equals the inner product of the
    represented elements.  Vectors of different lengths are rejected.
    """
    a = as_vector(u)
    b = as_vector(v)
    if a.size != b.size:
        raise ValueError(f"dimension mismatch in inner product: {a.size} vs {b.size}")
    return float(a @ b)


def norm(u) -> float:
    """Norm induced by :func:`inner_product`."""
    a = as_vector(u)
    return float(np.linalg.norm(a))


@dataclass(frozen=True)
class CurveGrid:
    """Abscissae and quadrature weights for tabulated curves.

    ``grid_points`` must be strictly increasing and ``quadrature_weights``
    strictly positive with matching length.  The weights define the discrete
    approximation to the L2 inner product used when projecting curves onto
    basis coefficients.
    """

    grid_points: np.ndarray
    quadrature_weights: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.grid_points, dtype=float)
        wts = np.asarray(self.quadrature_weights, dtype=float)
        if pts.ndim != 1 or wts.ndim != 1:
            raise ValueError("grid points and weights must be 1-d")
        if pts.size < 2:
            raise ValueError(f"grid needs at least 2 points, got {pts.size}")
        if pts.size != wts.size:
            raise ValueError(f"grid has {pts.size} points but {wts.size} weights")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(wts)):
            raise ValueError("grid points and weights must be finite")
        if np.any(np.diff(pts) <= 0):
            bad = int(np.flatnonzero(np.diff(pts) <= 0)[0])
            raise ValueError(
                f"grid points must be strictly increasing; violation between indices {bad} and {bad + 1}"
            )
        if np.any(wts <= 0):
            bad = int(np.flatnonzero(wts <= 0)[0])
            raise ValueError(f"quadrature weights must be positive; weight {bad} is {wts[bad]}")
        object.__setattr__(self, "grid_points", pts)
        object.__setattr__(self, "quadrature_weights", wts)

    @property
    def size(self) -> int:
        return self.grid_points.size

    @classmethod
    def trapezoid(cls, grid_points) -> "CurveGrid":
        """Trapezoid-rule weights on an arbitrary strictly increasing grid."""
        pts = np.asarray(grid_points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("trapezoid grid needs a 1-d array of at least 2 points")
        wts = np.empty_like(pts)
        wts[0] = (pts[1] - pts[0]) / 2.0
        wts[-1] = (pts[-1] - pts[-2]) / 2.0
        if pts.size > 2:
            wts[1:-1] = (pts[2:] - pts[:-2]) / 2.0
        return cls(pts, wts)

    @classmethod
    def uniform_periodic(cls, m: int, interval: tuple[float, float] = (0.0, 1.0)) -> "CurveGrid":
        """Uniform grid of ``m`` points on [a, b) with equal weights (b-a)/m.

        Exact for trigonometric polynomials up to the grid's Nyquist order,
        which makes the Fourier Gram matrix the identity to rounding error.
        """
        if m < 2:
            raise ValueError(f"periodic grid needs at least 2 points, got {m}")
        a, b = float(interval[0]), float(interval[1])
        if not b > a:
            raise ValueError(f"interval must satisfy a < b, got ({a}, {b})")
        pts = a + (b - a) * np.arange(m) / m
        wts = np.full(m, (b - a) / m)
        return cls(pts, wts)


def fourier_basis(grid_points, J: int) -> np.ndarray:
    """Tabulate the first ``J`` orthonormal Fourier functions on [0, 1).

    Row 0 is the constant 1; rows 2k-1 and 2k are sqrt(2) cos(2 pi k t) and
    sqrt(2) sin(2 pi k t).  Returns shape ``(J, m)``.  Orthonormality holds
    under :meth:`CurveGrid.uniform_periodic` weights when ``J`` is below the
    grid's Nyquist order, and approximately under trapezoid weights on fine
    grids; :func:`curve_to_coeffs` checks the Gram matrix either way.
    """
    pts = np.asarray(grid_points, dtype=float)
    if pts.ndim != 1:
        raise ValueError("grid points must be 1-d")
    if J < 1:
        raise ValueError(f"basis size must be >= 1, got {J}")
    basis = np.empty((J, pts.size))
    basis[0] = 1.0
    for row in range(1, J):
        k = (row + 1) // 2
        phase = 2.0 * np.pi * k * pts
        basis[row] = np.sqrt(2.0) * (np.cos(phase) if row % 2 == 1 else np.sin(phase))
    return basis


def curve_to_coeffs(samples, basis, grid: CurveGrid, *, gram_tol: float = 1e-6):
    """Project tabulated curves onto basis coefficients by quadrature.

    Parameters
    ----------
    samples : array_like
        Curve values on the grid, shape ``(m,)`` for one curve or ``(n, m)``
        for a batch.
    basis : array_like
        Basis functions tabulated on the same grid, shape ``(J, m)``.
    grid : CurveGrid
        Abscissae and quadrature weights; its length must match ``samples``
        and ``basis``.
    gram_tol : float
        Largest allowed deviation of the weighted Gram matrix from the
        identity.  A violation means the basis is not orthonormal under the
        supplied weights and the projection would be silently biased, so it
        is an error.

    Returns
    -------
    coeffs : ndarray
        Shape ``(J,)`` or ``(n, J)`` matching the input.
    residual : float or ndarray
        Quadrature L2 norm of the part of each curve outside the basis span.
    """
    y = np.asarray(samples, dtype=float)
    b = np.asarray(basis, dtype=float)
    if b.ndim != 2:
        raise ValueError(f"basis must have shape (J, m), got {b.shape}")
    m = grid.size
    if b.shape[1] != m:
        raise ValueError(f"basis tabulated on {b.shape[1]} points but grid has {m}")
    if y.shape[-1] != m:
        raise ValueError(f"curve sampled on {y.shape[-1]} points but grid has {m}")
    if y.ndim not in (1, 2):
        raise ValueError(f"samples must be 1-d or 2-d, got shape {y.shape}")

    w = grid.quadrature_weights
    gram = (b * w) @ b.T
    dev = np.abs(gram - np.eye(b.shape[0]))
    worst = np.unravel_index(np.argmax(dev), dev.shape)
    if dev[worst] > gram_tol:
        i, j = (int(k) for k in worst)
        raise ValueError(
            f"basis is not orthonormal under the quadrature weights: "
            f"Gram[{i},{j}] = {gram[i, j]:.3e} deviates from identity by {dev[worst]:.3e} "
            f"(tolerance {gram_tol:.1e})"
        )

    coeffs = (y * w) @ b.T
    recon = coeffs @ b
    residual = np.sqrt(np.sum(w * (y - recon) ** 2, axis=-1))
    return coeffs, (float(residual) if y.ndim == 1 else residual)


# Curve file format -------------------------------------------------------
#
# Delimited text, one curve per row.  The header row holds the abscissae
# t_0,...,t_{m-1}; every data row holds the curve values at those points.
# Floats are written with repr so a write/read round trip is exact.


def write_curves(path, grid_points, curves) -> None:
    """Write tabulated curves with an abscissae header row."""
    pts = np.asarray(grid_points, dtype=float)
    data = np.atleast_2d(np.asarray(curves, dtype=float))
    if data.shape[1] != pts.size:
        raise ValueError(f"curves have {data.shape[1]} samples but grid has {pts.size} points")
    lines = [",".join(repr(float(t)) for t in pts)]
    for row in data:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_curves(path):
    """Read a curve file back as ``(grid_points, curves)``.

    Malformed input is rejected with the offending row and column; row 0 is
    the header.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise ValueError(f"curve file {path} is empty")

    def parse_row(row_idx: int, line: str, expect: int | None) -> np.ndarray:
        fields = line.split(",")
        if expect is not None and len(fields) != expect:
            raise ValueError(
                f"curve file {path}, row {row_idx}: expected {expect} fields, got {len(fields)}"
            )
        out = np.empty(len(fields))
        for col, tok in enumerate(fields):
            try:
                out[col] = float(tok)
            except ValueError:
                raise ValueError(
                    f"curve file {path}, row {row_idx}, column {col}: could not parse {tok!r} as a number"
                ) from None
        return out

    pts = parse_row(0, lines[0], None)
    if pts.size < 2:
        raise ValueError(f"curve file {path}: header must list at least 2 grid points")
    if np.any(np.diff(pts) <= 0):
        raise ValueError(f"curve file {path}: header grid points must be strictly increasing")
    if len(lines) == 1:
        raise ValueError(f"curve file {path}: no curve rows after the header")
    curves = np.vstack([parse_row(i, ln, pts.size) for i, ln in enumerate(lines[1:], start=1)])
    return pts, curves
