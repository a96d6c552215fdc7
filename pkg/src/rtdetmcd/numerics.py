"""Small dense symmetric linear algebra and chi-squared constants.

Matrices here are at most 40 x 40, so everything is plain numpy/scipy on
full arrays. A Cholesky factor is just its lower-triangular ``ndarray``.
"""

import numpy as np
from scipy import linalg, stats

from .errors import ConvergenceFailure, DomainError, NotPositiveDefinite

PIVOT_RTOL = 1e-12


def symmetrize(S):
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + S.T)


def cholesky(S):
    """Lower Cholesky factor ``L`` with ``L @ L.T == S``.

    Raises
    ------
    NotPositiveDefinite
        If a squared pivot falls below ``1e-12`` times the largest diagonal
        entry of `S`, or LAPACK rejects the matrix outright.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("expected a square matrix")
    try:
        L = linalg.cholesky(S, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    d = np.diag(L)
    tol = PIVOT_RTOL * max(float(np.max(np.diag(S))), 0.0)
    if not np.all(np.isfinite(d)) or np.any(d * d <= tol):
        raise NotPositiveDefinite("pivot below tolerance")
    return L


def forward_solve(L, v):
    """Solve ``L @ y = v`` for lower-triangular `L` (vector or matrix `v`)."""
    return linalg.solve_triangular(L, v, lower=True, check_finite=False)


def log_det(L):
    """Log-determinant of ``L @ L.T`` from its Cholesky factor."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def chol_inverse(L):
    """Inverse of ``L @ L.T`` from its Cholesky factor."""
    p = L.shape[0]
    inv = linalg.cho_solve((L, True), np.eye(p), check_finite=False)
    return symmetrize(inv)


def sym_eigen(S):
    """Eigen-decomposition of a symmetric matrix, eigenvalues descending.

    Returns
    -------
    values : ndarray, shape (p,)
    vectors : ndarray, shape (p, p)
        Orthonormal eigenvectors stored as columns.
    """
    try:
        w, V = np.linalg.eigh(symmetrize(S))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from None
    return w[::-1].copy(), V[:, ::-1].copy()


def sym_power(S, exponent):
    """``S ** exponent`` for symmetric positive definite `S`.

    Only the square root and inverse square root are needed by the
    estimators, so `exponent` must be ``0.5`` or ``-0.5``.
    """
    if exponent not in (0.5, -0.5):
        raise ValueError("exponent must be 0.5 or -0.5")
    w, V = sym_eigen(S)
    if w[-1] <= 0:
        raise NotPositiveDefinite("non-positive eigenvalue")
    return symmetrize((V * w**exponent) @ V.T)


def condition_1norm(S, L=None):
    """1-norm condition number ``||S||_1 * ||S^-1||_1``.

    The inverse is formed exactly from the Cholesky factor `L` (computed
    when not supplied); at p <= 40 that costs less than estimating it.
    """
    S = np.asarray(S, dtype=float)
    if L is None:
        L = cholesky(S)
    inv = chol_inverse(L)
    return float(np.abs(S).sum(axis=0).max() * np.abs(inv).sum(axis=0).max())


def chi2_quantile(dof, prob):
    """Quantile of the chi-squared distribution with `dof` degrees of freedom."""
    if not 0.0 < prob < 1.0:
        raise DomainError(f"probability {prob} outside (0, 1)")
    if dof < 1:
        raise DomainError(f"degrees of freedom {dof} < 1")
    return float(stats.chi2.ppf(prob, dof))


def consistency_factor(alpha, p):
    """Gaussian consistency factor for a covariance over an ``alpha`` coverage.

    ``c(alpha) = alpha / F_{chi2(p+2)}(chi2_quantile(p, alpha))``, with
    ``c(1) = 1``. Multiplying the covariance of the ``alpha`` fraction of
    points closest to the center makes it unbiased at the normal model.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"coverage {alpha} outside (0, 1]")
    if alpha == 1.0:
        return 1.0
    q = chi2_quantile(p, alpha)
    return float(alpha / stats.chi2.cdf(q, p + 2))
