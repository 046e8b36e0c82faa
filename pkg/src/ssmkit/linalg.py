"""Dense linear-algebra kernels for the reconstruction path.

Singular value decomposition plus a Moore-Penrose pseudo-inverse with an
explicit relative-tolerance policy. The tolerance (``rcond``) travels with the
caller all the way from the CLI / service surface, because near-duplicate
pinned vertices can make the selected sub-basis rank deficient.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, SvdConvergenceError

DEFAULT_RCOND = 1e-10


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got array of shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    return a


def svd(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD: returns (U, s, V) with a = U @ diag(s) @ V.T.

    Singular values come back nonincreasing and >= 0; U and V have
    orthonormal columns. Non-convergence is reported with the matrix
    dimensions so the caller can decide on a fallback.
    """
    a = _as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(
            f"SVD did not converge for a {a.shape[0]}x{a.shape[1]} matrix: {exc}"
        ) from exc
    return u, s, vt.T


def pinv(a, rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD with relative cutoff.

    Singular values > rcond * max(s) are inverted, the rest are zeroed, so the
    result is the exact pseudo-inverse of the rank-truncated input.
    """
    if not 0.0 < rcond < 1.0:
        raise ValueError(f"rcond must lie in (0, 1), got {rcond!r}")
    u, s, v = svd(a)
    if s.size == 0:
        return np.zeros((a.shape[1], a.shape[0]))
    keep = s > rcond * s[0]
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (v * inv_s) @ u.T


def lstsq_min_norm(a, b, rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Minimum-norm least-squares solution of a @ x = b via :func:`pinv`."""
    a = _as_matrix(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != a.shape[0]:
        raise DimensionError(
            f"matrix has {a.shape[0]} rows but right-hand side has length {b.shape[0]}"
        )
    return pinv(a, rcond=rcond) @ b
