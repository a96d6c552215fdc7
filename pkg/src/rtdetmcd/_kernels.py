"""Compiled inner loops: per-row distances and subset moment updates."""

import numba
import numpy as np
from numba import njit, prange

numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]


ROW_BLOCK = 16


@njit(cache=True, nogil=True)
def _chol_block(Z, mu, L, rd, i0, m, Y, acc, out):
    p = Z.shape[1]
    for r in range(m):
        acc[r] = 0.0
    for a in range(p):
        for r in range(m):
            Y[a, r] = Z[i0 + r, a] - mu[a]
        for b in range(a):
            lab = L[a, b]
            for r in range(m):
                Y[a, r] -= lab * Y[b, r]
        for r in range(m):
            s = Y[a, r] * rd[a]
            Y[a, r] = s
            acc[r] += s * s
    for r in range(m):
        out[i0 + r] = acc[r]


@njit(cache=True, nogil=True)
def sq_dist_chol(Z, mu, L):
    """Squared norms of ``L^-1 (z_i - mu)`` by forward substitution.

    Rows are substituted in small interleaved blocks so the dependency chain
    of one row overlaps with its neighbours; per-row arithmetic is unchanged.
    """
    n, p = Z.shape
    out = np.empty(n)
    rd = 1.0 / np.diag(L).copy()
    Y = np.empty((p, ROW_BLOCK))
    acc = np.empty(ROW_BLOCK)
    for i0 in range(0, n, ROW_BLOCK):
        _chol_block(Z, mu, L, rd, i0, min(ROW_BLOCK, n - i0), Y, acc, out)
    return out


@njit(cache=True, nogil=True, parallel=True)
def sq_dist_chol_par(Z, mu, L):
    n, p = Z.shape
    out = np.empty(n)
    rd = 1.0 / np.diag(L).copy()
    nblocks = (n + ROW_BLOCK - 1) // ROW_BLOCK
    for k in prange(nblocks):
        i0 = k * ROW_BLOCK
        Y = np.empty((p, ROW_BLOCK))
        acc = np.empty(ROW_BLOCK)
        _chol_block(Z, mu, L, rd, i0, min(ROW_BLOCK, n - i0), Y, acc, out)
    return out


@njit(cache=True, nogil=True)
def sq_dist_inv(Z, mu, P):
    """Quadratic forms ``(z_i - mu)^T P (z_i - mu)`` for a full matrix `P`."""
    n, p = Z.shape
    out = np.empty(n)
    r = np.empty(p)
    for i in range(n):
        for a in range(p):
            r[a] = Z[i, a] - mu[a]
        acc = 0.0
        for a in range(p):
            s = 0.0
            for b in range(p):
                s += P[a, b] * r[b]
            acc += r[a] * s
        out[i] = acc
    return out


@njit(cache=True, nogil=True)
def _step(Z, i, sign, mu, lam, h, u, v):
    p = Z.shape[1]
    h += sign
    for a in range(p):
        u[a] = Z[i, a] - mu[a]
    for a in range(p):
        mu[a] += sign * u[a] / h
    for a in range(p):
        v[a] = Z[i, a] - mu[a]
    for a in range(p):
        for b in range(p):
            lam[a, b] += sign * u[a] * v[b]
    return h


@njit(cache=True, nogil=True)
def delta_update(Z, leave, join, mu, lam, h):
    """Move observations out of / into a subset, updating mean and sscp in place.

    Leavers are processed before joiners, each in the given order.
    Returns the final subset size.
    """
    p = Z.shape[1]
    u = np.empty(p)
    v = np.empty(p)
    for k in range(leave.shape[0]):
        h = _step(Z, leave[k], -1, mu, lam, h, u, v)
    for k in range(join.shape[0]):
        h = _step(Z, join[k], 1, mu, lam, h, u, v)
    return h


@njit(cache=True, nogil=True)
def _smw_step(Z, i, sign, mu, lam, inv, h, u, v, w, t):
    p = Z.shape[1]
    h = _step(Z, i, sign, mu, lam, h, u, v)
    # w = inv u, t = inv v  (inv symmetric, so v^T inv = t^T)
    for a in range(p):
        sw = 0.0
        st = 0.0
        for b in range(p):
            sw += inv[a, b] * u[b]
            st += inv[a, b] * v[b]
        w[a] = sw
        t[a] = st
    q = 0.0
    for a in range(p):
        q += v[a] * w[a]
    delta = 1.0 + sign * q
    if delta <= 0.0:
        return h, delta
    f = sign / delta
    for a in range(p):
        for b in range(p):
            inv[a, b] -= f * w[a] * t[b]
    return h, delta


@njit(cache=True, nogil=True)
def delta_update_smw(Z, leave, join, mu, lam, inv, h):
    """Like :func:`delta_update`, also maintaining the inverse by
    Sherman-Morrison-Woodbury and returning the log-determinant change.

    Returns ``(h, dlogdet, ok)``; ``ok`` is False when a rank-one update
    would make the sscp matrix singular.
    """
    p = Z.shape[1]
    u = np.empty(p)
    v = np.empty(p)
    w = np.empty(p)
    t = np.empty(p)
    dlog = 0.0
    for k in range(leave.shape[0]):
        h, d = _smw_step(Z, leave[k], -1, mu, lam, inv, h, u, v, w, t)
        if d <= 0.0:
            return h, dlog, False
        dlog += np.log(d)
    for k in range(join.shape[0]):
        h, d = _smw_step(Z, join[k], 1, mu, lam, inv, h, u, v, w, t)
        if d <= 0.0:
            return h, dlog, False
        dlog += np.log(d)
    return h, dlog, True
