"""Dense-matrix validation, singular-value summaries, and pseudoinverse application.

Matrices are plain float64 row-major numpy arrays; the helpers here enforce the
invariants (finite entries, at least one row and column) that the rest of the
package relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class SpectralSummary:
    """Singular-value extremes of a matrix.

    ``kappa2`` is the squared condition number ``sigma_max**2 / sigma_min**2``
    and is ``inf`` when the matrix is rank deficient.
    """

    sigma_min: float
    sigma_max: float
    frob: float
    kappa2: float


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a finite float64 C-order 2-D array."""
    m = np.ascontiguousarray(np.asarray(a, dtype=float))
    if m.ndim != 2:
        raise InputError(f"{name} must be 2-dimensional, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise InputError(f"{name} must have at least one row and column, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise InputError(f"{name} has non-finite entries")
    return m


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Validate and return ``a`` as a finite float64 1-D array."""
    v = np.ascontiguousarray(np.asarray(a, dtype=float))
    if v.ndim != 1:
        raise InputError(f"{name} must be 1-dimensional, got ndim={v.ndim}")
    if v.shape[0] < 1:
        raise InputError(f"{name} must have at least one entry")
    if not np.isfinite(v).all():
        raise InputError(f"{name} has non-finite entries")
    return v


def spectral_summary(m) -> SpectralSummary:
    """Singular-value extremes, Frobenius norm, and squared condition number.

    The extremes come from a full SVD; the Frobenius norm is accumulated
    directly from the entries so it can cross-check the singular values.
    """
    m = as_matrix(m)
    sv = np.linalg.svd(m, compute_uv=False)
    frob = float(np.sqrt(np.einsum("ij,ij->", m, m)))
    smin = float(sv[-1])
    smax = float(sv[0])
    kappa2 = float("inf") if smin == 0.0 else (smax / smin) ** 2
    return SpectralSummary(sigma_min=smin, sigma_max=smax, frob=frob, kappa2=kappa2)


def apply_pinv(m, y, rel_tol: float | None = None) -> np.ndarray:
    """Apply the Moore-Penrose pseudoinverse: the minimum-norm least-squares
    solution ``z`` of ``m @ z = y``.

    The pseudoinverse is never materialized.  A QR factorization handles the
    full-rank case; when the triangular factor looks rank deficient (smallest
    diagonal below ``rel_tol`` times the largest) the computation falls back to
    an SVD-based solve in which singular values below ``rel_tol * sigma_max``
    are treated as zero.  ``rel_tol`` defaults to ``1e-12 * max(m.shape)``.
    """
    m = as_matrix(m)
    y = as_vector(y)
    s, n = m.shape
    if y.shape[0] != s:
        raise InputError(f"right-hand side has length {y.shape[0]}, expected {s}")
    if rel_tol is None:
        rel_tol = 1e-12 * max(s, n)
    if not m.any():
        # A zero matrix maps every right-hand side to the zero vector.
        return np.zeros(n)
    if s >= n:
        q, r = np.linalg.qr(m)
        d = np.abs(np.diagonal(r))
        if d.min() > rel_tol * d.max():
            return np.linalg.solve(r, q.T @ y)
    else:
        q, r = np.linalg.qr(m.T)
        d = np.abs(np.diagonal(r))
        if d.min() > rel_tol * d.max():
            # Minimum-norm solution lies in the row space: z = Q R^{-T} y.
            return q @ np.linalg.solve(r.T, y)
    return np.linalg.lstsq(m, y, rcond=rel_tol)[0]
