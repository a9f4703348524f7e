"""Empirical covariance operators, spectral decompositions and projectors.

Operators are plain symmetric ``(J, J)`` float arrays; structure that needs
invariants (the eigenvalue/eigenvector pairing) gets a dataclass, everything
else is validated by explicit check helpers.  Eigenvalues are kept in
nonincreasing order with a deterministic sign convention so that repeated
decompositions of the same operator are bitwise identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SYMMETRY_RTOL",
    "check_symmetric",
    "empirical_covariance",
    "SpectralDecomposition",
    "eigendecompose",
    "projector_from",
    "validate_projector",
    "sup_norm",
    "hs_norm",
    "spectral_gap",
    "eigen_localization",
    "operator_to_jsonable",
    "operator_from_jsonable",
    "save_operator",
    "load_operator",
]

# Relative asymmetry tolerated before an "operator" argument is rejected.
SYMMETRY_RTOL = 1e-12


def _as_operator(T) -> np.ndarray:
    M = np.asarray(T, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("operator has non-finite entries")
    return M


def check_symmetric(T, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Validate that ``T`` is symmetric up to ``rtol`` relative error."""
    M = _as_operator(T)
    scale = float(np.max(np.abs(M))) or 1.0
    asym = float(np.max(np.abs(M - M.T)))
    if asym > rtol * scale:
        raise ValueError(
            f"operator is not symmetric: max |T - T'| = {asym:.3e} exceeds {rtol:.1e} * {scale:.3e}"
        )
    return M


def empirical_covariance(sample, center: bool = False) -> np.ndarray:
    """Second-moment operator (1/n) sum_i <x_i, .> x_i of a coefficient sample.

    With ``center=True`` the sample mean is removed first.  The default is
    off: the estimators downstream assume a mean-zero process, and centering
    would silently change which operator the projectors approximate.
    """
    X = np.asarray(sample, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"sample must be an (n, J) array, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("empirical covariance needs a nonempty sample")
    if not np.all(np.isfinite(X)):
        raise ValueError("sample has non-finite entries")
    if center:
        X = X - X.mean(axis=0)
    G = (X.T @ X) / X.shape[0]
    # Exact symmetry despite accumulation order effects.
    return (G + G.T) / 2.0


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (nonincreasing) with matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self) -> None:
        lam = np.asarray(self.eigenvalues, dtype=float)
        V = np.asarray(self.eigenvectors, dtype=float)
        if lam.ndim != 1:
            raise ValueError(f"eigenvalues must be 1-d, got shape {lam.shape}")
        J = lam.size
        if V.shape != (J, J):
            raise ValueError(f"eigenvectors must have shape ({J}, {J}), got {V.shape}")
        if np.any(np.diff(lam) > 1e-12 * max(1.0, float(np.abs(lam).max(initial=0.0)))):
            bad = int(np.flatnonzero(np.diff(lam) > 0)[0])
            raise ValueError(
                f"eigenvalues must be nonincreasing; order violated between indices {bad} and {bad + 1}"
            )
        ortho = float(np.max(np.abs(V.T @ V - np.eye(J))))
        if ortho > 1e-8:
            raise ValueError(f"eigenvector columns are not orthonormal: max deviation {ortho:.3e}")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", V)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size


def eigendecompose(T, rtol: float = SYMMETRY_RTOL) -> SpectralDecomposition:
    """Full spectral decomposition of a symmetric operator.

    Eigenvalues come back in nonincreasing order (stable under ties) and each
    eigenvector has its first nonzero coordinate made positive, so equal
    inputs give bitwise equal outputs.
    """
    M = check_symmetric(T, rtol)
    w, V = np.linalg.eigh(M)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = V[:, order]
    for j in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, j]) > 1e-12)
        lead = nz[0] if nz.size else 0
        if V[lead, j] < 0:
            V[:, j] = -V[:, j]
    return SpectralDecomposition(w, V)


def projector_from(decomposition: SpectralDecomposition, D: int, *, gap_tolerance: float | None = None) -> np.ndarray:
    """Orthogonal projector onto the span of the leading ``D`` eigenvectors.

    Requires a clear eigengap below position ``D``: the rank would otherwise
    depend on floating-point tie-breaking.  ``gap_tolerance`` defaults to
    ``1e-10`` times the leading eigenvalue's magnitude.
    """
    lam = decomposition.eigenvalues
    J = lam.size
    if not 1 <= D < J:
        raise ValueError(f"projection dimension must satisfy 1 <= D < {J}, got {D}")
    tol = gap_tolerance if gap_tolerance is not None else 1e-10 * abs(float(lam[0]))
    gap = float(lam[D - 1] - lam[D])
    if gap <= tol:
        raise ValueError(
            f"eigengap too small for a well-defined rank-{D} projector: "
            f"eigenvalue {D} = {float(lam[D - 1])!r}, eigenvalue {D + 1} = {float(lam[D])!r} "
            f"(gap {gap:.3e} <= tol {tol:.3e})"
        )
    E = decomposition.eigenvectors[:, :D]
    P = E @ E.T
    return (P + P.T) / 2.0


def validate_projector(P, rank: int | None = None, tol: float = 1e-8) -> np.ndarray:
    """Check idempotence, symmetry and (optionally) the trace of a projector."""
    M = check_symmetric(P, rtol=1e-8)
    idem = float(np.max(np.abs(M @ M - M)))
    if idem > tol:
        raise ValueError(f"matrix is not idempotent: max |P@P - P| = {idem:.3e}")
    if rank is not None:
        tr = float(np.trace(M))
        if abs(tr - rank) > tol * max(1, rank):
            raise ValueError(f"projector trace {tr!r} does not match rank {rank}")
    return M


def sup_norm(T) -> float:
    """Operator norm of a symmetric matrix: largest eigenvalue magnitude."""
    M = check_symmetric(T, rtol=1e-8)
    return float(np.max(np.abs(np.linalg.eigvalsh(M))))


def hs_norm(T) -> float:
    """Hilbert-Schmidt (Frobenius) norm; always >= :func:`sup_norm`."""
    M = _as_operator(T)
    return float(np.linalg.norm(M, "fro"))


def spectral_gap(decomposition: SpectralDecomposition, D: int) -> float:
    """Half-distance between eigenvalues ``D`` and ``D+1``; must be positive."""
    lam = decomposition.eigenvalues
    if not 1 <= D < lam.size:
        raise ValueError(f"need 1 <= D < {lam.size}, got {D}")
    gap = float(lam[D - 1] - lam[D]) / 2.0
    if gap <= 0:
        raise ValueError(
            f"spectral gap at D={D} is not positive: eigenvalue {D} = {float(lam[D - 1])!r}, "
            f"eigenvalue {D + 1} = {float(lam[D])!r}"
        )
    return gap


def eigen_localization(empirical: SpectralDecomposition, truth: SpectralDecomposition, D: int) -> bool:
    """Whether the empirical eigenvalues stay in the truth's localization bands.

    The event asks for three things at once: the top empirical eigenvalue at
    most the true one plus 1/2, empirical eigenvalue ``D`` no more than one
    half-gap below true eigenvalue ``D``, and empirical eigenvalue ``D+1``
    strictly below that same threshold.  On this event the empirical rank-D
    eigenspace is separated from the rest of the spectrum.
    """
    if empirical.dim != truth.dim:
        raise ValueError(f"dimension mismatch: {empirical.dim} vs {truth.dim}")
    delta = spectral_gap(truth, D)
    lam_hat = empirical.eigenvalues
    lam = truth.eigenvalues
    threshold = lam[D - 1] - delta
    return bool(lam_hat[0] <= lam[0] + 0.5 and lam_hat[D - 1] >= threshold and lam_hat[D] < threshold)


# Serialization -----------------------------------------------------------


def operator_to_jsonable(T) -> dict:
    """Represent an operator as ``{"dim": J, "entries": row-major list}``."""
    M = _as_operator(T)
    return {"dim": int(M.shape[0]), "entries": [float(v) for v in M.ravel(order="C")]}


def operator_from_jsonable(obj: dict) -> np.ndarray:
    if not isinstance(obj, dict) or "dim" not in obj or "entries" not in obj:
        raise ValueError("operator record must be a dict with 'dim' and 'entries'")
    J = int(obj["dim"])
    entries = np.asarray(obj["entries"], dtype=float)
    if entries.size != J * J:
        raise ValueError(f"operator record claims dim {J} but has {entries.size} entries")
    return entries.reshape(J, J)


def save_operator(path, T) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(operator_to_jsonable(T), fh, sort_keys=True)
        fh.write("\n")


def load_operator(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        return operator_from_jsonable(json.load(fh))
