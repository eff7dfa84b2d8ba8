"""Dense SPD linear algebra: Cholesky, triangular solves, inverses, log-determinants.

Matrices are plain ``numpy`` arrays. Factors are lower triangular unless
stated otherwise; :func:`precision_factor` is the one exception and returns
the upper-triangular ``U = L^{-T}`` so that ``U @ U.T`` is the precision.
"""

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite, ValidationError

SYMMETRY_RTOL = 1e-12
PIVOT_RTOL = 1e-13


def as_square(m, name="matrix"):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    return m


def symmetrize(m, name="matrix"):
    """Return ``(m + m.T) / 2`` after checking ``m`` is symmetric to round-off."""
    m = as_square(m, name)
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale > 0 and np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale:
        raise ValidationError(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


def cholesky(m):
    """Lower Cholesky factor ``L`` with ``L @ L.T == m``.

    The input is symmetrized first. A pivot ``L[j, j]**2`` smaller than
    ``1e-13 * max(diag(m))`` counts as a failure, so near-singular input
    raises instead of producing a factor full of garbage.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Symmetric positive definite matrix.

    Returns
    -------
    L : ndarray, shape (n, n)

    Raises
    ------
    NotPositiveDefinite
        With ``column`` set to the 1-based index of the first bad pivot.
    """
    m = symmetrize(m)
    if m.shape[0] == 0:
        return m.copy()
    diag = np.diag(m)
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    L, info = lapack.dpotrf(m, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(int(info))
    if info < 0:
        raise ValidationError(f"dpotrf rejected argument {-info}")
    threshold = PIVOT_RTOL * max(np.max(diag), 0.0)
    bad = np.flatnonzero(np.diag(L) ** 2 <= threshold)
    if bad.size:
        raise NotPositiveDefinite(int(bad[0]) + 1)
    return L


def _check_rhs(L, b):
    L = np.asarray(L, dtype=float)
    b = np.asarray(b, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise DimensionMismatch(f"factor must be square, got shape {L.shape}")
    if b.shape[0] != L.shape[0]:
        raise DimensionMismatch(
            f"right-hand side has {b.shape[0]} rows, factor is {L.shape[0]}x{L.shape[0]}"
        )
    return L, b


def forward_solve(L, b):
    """Solve ``L x = b`` for lower-triangular ``L``; ``b`` may be a vector or matrix."""
    L, b = _check_rhs(L, b)
    if L.shape[0] == 0:
        return b.copy()
    return solve_triangular(L, b, lower=True, check_finite=False)


def back_solve(L, b):
    """Solve ``L.T x = b`` for lower-triangular ``L``."""
    L, b = _check_rhs(L, b)
    if L.shape[0] == 0:
        return b.copy()
    return solve_triangular(L, b, lower=True, trans="T", check_finite=False)


def chol_solve(L, b):
    """Solve ``(L L^T) x = b``."""
    return back_solve(L, forward_solve(L, b))


def precision_factor(sigma):
    """Factor of the precision matrix from a covariance matrix.

    Factors ``sigma = L L^T`` and solves ``L u_i = e_i`` column by column,
    giving ``U = (L^{-1})^T`` with ``U @ U.T == inv(sigma)``. ``U`` is upper
    triangular.
    """
    L = cholesky(sigma)
    n = L.shape[0]
    return forward_solve(L, np.eye(n)).T


def logdet_from_chol(L):
    """``log|L L^T|`` from a triangular factor."""
    d = np.diag(np.asarray(L, dtype=float))
    return 2.0 * float(np.sum(np.log(d)))


def spd_inverse(m):
    """Inverse of a (small) SPD matrix through its Cholesky factor, symmetrized."""
    L = cholesky(m)
    Linv = forward_solve(L, np.eye(L.shape[0]))
    inv = Linv.T @ Linv
    return 0.5 * (inv + inv.T)


def inverse_from_chol(L):
    L = np.asarray(L, dtype=float)
    Linv = forward_solve(L, np.eye(L.shape[0]))
    inv = Linv.T @ Linv
    return 0.5 * (inv + inv.T)
