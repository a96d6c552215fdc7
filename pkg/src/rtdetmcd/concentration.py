"""Concentration steps (C-steps) and their three execution strategies.

``"full"``
    Distances from an explicit inverse, determinant and condition number
    from LU/inverse, subset moments recomputed from scratch.
``"cholesky"``
    One Cholesky factorization per step gives distances (by forward
    substitution), the log-determinant and the condition number; moments
    are still recomputed.
``"update"``
    As ``"cholesky"``, but subset mean and sscp matrix are updated only for
    the observations that enter or leave. When exactly two observations are
    swapped the inverse and determinant are updated by Sherman-Morrison-
    Woodbury instead of refactorizing.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceWarning, NotPositiveDefinite, SingularCandidate
from .numerics import chol_inverse, cholesky, consistency_factor, log_det

STRATEGIES = ("full", "cholesky", "update")
MAX_ITER = 100
REFRESH_EVERY = 32
DET_RTOL = 1e-12


@dataclass
class HSubsetState:
    """An h-subset with its mean and sscp matrix ``(h - 1) * covariance``.

    ``inv_sscp`` is current whenever ``chol`` is None; it is then the only
    representation of the sscp inverse (the Sherman-Morrison-Woodbury path).
    """

    members: np.ndarray
    center: np.ndarray
    sscp: np.ndarray
    log_det_sscp: float
    h: int
    chol: np.ndarray = None
    inv_sscp: np.ndarray = None
    condition: float = np.nan
    since_refresh: int = 0

    @property
    def scatter(self):
        return self.sscp / (self.h - 1)

    @property
    def log_det(self):
        """Log-determinant of the (unscaled) subset covariance."""
        return self.log_det_sscp - len(self.center) * np.log(self.h - 1)


@dataclass(frozen=True)
class CandidateResult:
    center: np.ndarray
    scatter: np.ndarray
    log_det: float
    members: np.ndarray
    iterations: int
    converged: bool
    history: tuple = field(default=(), repr=False)


def _as_rows(Z):
    return np.ascontiguousarray(Z, dtype=float)


def robust_distances(Z, center, scatter):
    """Mahalanobis distances of the rows of `Z` via one Cholesky factorization."""
    Z = _as_rows(np.atleast_2d(Z))
    L = cholesky(scatter)
    return np.sqrt(_kernels.sq_dist_chol(Z, np.asarray(center, dtype=float), L))


def select_smallest(d, h):
    """Boolean mask of the `h` smallest values of `d`, ties broken by index."""
    n = len(d)
    members = np.zeros(n, dtype=bool)
    if h >= n:
        members[:] = True
        return members
    kth = np.partition(d, h - 1)[h - 1]
    below = d < kth
    members |= below
    need = h - int(below.sum())
    members[np.flatnonzero(d == kth)[:need]] = True
    return members


def _singular(msg="subset scatter is numerically singular"):
    return SingularCandidate(msg)


def _finish(state, strategy, kappa_max):
    """Fill factor/inverse, log-determinant and condition after moments change."""
    lam = state.sscp
    norm1 = np.abs(lam).sum(axis=0).max()
    if strategy == "full":
        sign, ld = np.linalg.slogdet(lam)
        if sign <= 0:
            raise _singular()
        try:
            inv = np.linalg.inv(lam)
        except np.linalg.LinAlgError:
            raise _singular() from None
        state.chol, state.inv_sscp, state.log_det_sscp = None, inv, float(ld)
    else:
        try:
            L = cholesky(lam)
        except NotPositiveDefinite:
            raise _singular() from None
        inv = chol_inverse(L)
        state.chol, state.inv_sscp, state.log_det_sscp = L, None, log_det(L)
    state.condition = float(norm1 * np.abs(inv).sum(axis=0).max())
    if not state.condition < kappa_max:
        raise _singular(f"condition number {state.condition:.4g} >= {kappa_max}")
    return state


def subset_state(Z, members, strategy="cholesky", kappa_max=1000.0):
    """Compute the state of an h-subset directly from its members."""
    Zh = Z[members]
    h = len(Zh)
    mu = Zh.mean(axis=0)
    D = Zh - mu
    lam = D.T @ D
    lam = 0.5 * (lam + lam.T)
    state = HSubsetState(members.copy(), mu, lam, np.nan, h)
    return _finish(state, strategy, kappa_max)


def subset_distances(Z, state):
    """Squared distances of all rows under the state's subset covariance."""
    if state.chol is not None:
        d2 = _kernels.sq_dist_chol(Z, state.center, state.chol)
    else:
        d2 = _kernels.sq_dist_inv(Z, state.center, state.inv_sscp)
    return d2 * (state.h - 1)


def _update_moments(Z, state, new_members, kappa_max):
    leave = np.flatnonzero(state.members & ~new_members)
    join = np.flatnonzero(new_members & ~state.members)
    if len(leave) == 0:
        return state
    if len(leave) > state.h // 2 or state.since_refresh + 1 >= REFRESH_EVERY:
        # long downdate chains lose accuracy; recompute directly
        return subset_state(Z, new_members, "update", kappa_max)

    mu = state.center.copy()
    lam = state.sscp.copy()
    if len(leave) == 1:
        inv = state.inv_sscp if state.inv_sscp is not None else chol_inverse(state.chol)
        inv = inv.copy()
        h, dlog, ok = _kernels.delta_update_smw(Z, leave, join, mu, lam, inv, state.h)
        if not ok:
            raise _singular()
        lam = 0.5 * (lam + lam.T)
        inv = 0.5 * (inv + inv.T)
        new = HSubsetState(
            new_members, mu, lam, state.log_det_sscp + dlog, h,
            chol=None, inv_sscp=inv, since_refresh=state.since_refresh + 1,
        )
        new.condition = float(
            np.abs(lam).sum(axis=0).max() * np.abs(inv).sum(axis=0).max()
        )
        if not new.condition < kappa_max:
            raise _singular(f"condition number {new.condition:.4g} >= {kappa_max}")
        return new

    h = _kernels.delta_update(Z, leave, join, mu, lam, state.h)
    lam = 0.5 * (lam + lam.T)
    new = HSubsetState(new_members, mu, lam, np.nan, h,
                       since_refresh=state.since_refresh + 1)
    return _finish(new, "update", kappa_max)


def cstep_once(Z, state, strategy="update", kappa_max=1000.0):
    """One concentration step: keep the `h` rows closest under the current fit.

    Raises
    ------
    SingularCandidate
        If the new subset's scatter has condition number >= `kappa_max`.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    Z = _as_rows(Z)
    d2 = subset_distances(Z, state)
    members = select_smallest(d2, state.h)
    if np.array_equal(members, state.members):
        return state
    if strategy == "update":
        return _update_moments(Z, state, members, kappa_max)
    return subset_state(Z, members, strategy, kappa_max)


def initial_subset(Z, center, scatter, h):
    """The `h` rows closest to a starting (center, scatter)."""
    try:
        L = cholesky(scatter)
    except NotPositiveDefinite:
        raise _singular("starting scatter is not positive definite") from None
    d2 = _kernels.sq_dist_chol(Z, np.asarray(center, dtype=float), L)
    return select_smallest(d2, h)


def converge(Z, start, h, kappa_max=1000.0, strategy="update", max_iter=MAX_ITER):
    """Iterate C-steps from a starting fit until the h-subset stops changing.

    Parameters
    ----------
    Z : ndarray, shape (n, p)
    start : object with ``center`` and ``scatter`` attributes
    h : int
        Subset size, ``p < h <= n``.

    Returns
    -------
    CandidateResult
        ``scatter`` includes the Gaussian consistency factor for coverage
        ``h / n``; ``log_det`` refers to the unscaled subset covariance.
        ``history`` holds the log-determinant after every step.

    Raises
    ------
    SingularCandidate
        If any visited subset is too ill-conditioned.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    Z = _as_rows(Z)
    n, p = Z.shape
    if not p < h <= n:
        raise ValueError(f"need p < h <= n, got h={h}")
    members = initial_subset(Z, start.center, start.scatter, h)
    state = subset_state(Z, members, strategy, kappa_max)
    history = [state.log_det]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = cstep_once(Z, state, strategy, kappa_max)
        if new is state:
            converged = True
            break
        history.append(new.log_det)
        old_ld, state = state.log_det_sscp, new
        if abs(np.expm1(new.log_det_sscp - old_ld)) < DET_RTOL:
            converged = True
            break
    if not converged:
        warnings.warn(f"C-steps did not converge in {max_iter} iterations",
                      ConvergenceWarning, stacklevel=2)
    scatter = consistency_factor(h / n, p) * state.scatter
    return CandidateResult(
        center=state.center.copy(),
        scatter=scatter,
        log_det=float(state.log_det),
        members=state.members.copy(),
        iterations=it,
        converged=converged,
        history=tuple(history),
    )


__all__ = [
    "CandidateResult",
    "HSubsetState",
    "STRATEGIES",
    "converge",
    "cstep_once",
    "robust_distances",
    "select_smallest",
    "subset_state",
]
