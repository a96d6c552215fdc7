"""Deterministic starting scatter estimates: wrapped covariance and LR-GSSCM."""

from dataclasses import dataclass

import numpy as np

from .errors import AllWeightsZero, DegenerateNorms


@dataclass(frozen=True)
class WrapParams:
    """Tuning constants of the wrapping function.

    Values with ``|z| <= b`` pass through unchanged, values beyond ``c`` are
    set to zero, and the band in between is bent back towards zero by
    ``q1 * tanh(q2 * (c - |z|))``.
    """

    b: float = 1.5
    c: float = 4.0
    q1: float = 1.541
    q2: float = 0.862

    def __post_init__(self):
        if not 0 < self.b < self.c:
            raise ValueError("need 0 < b < c")
        jump = abs(self.q1 * np.tanh(self.q2 * (self.c - self.b)) - self.b)
        if jump > 1e-3:
            raise ValueError(f"wrapping function discontinuous at b (jump {jump:.3g})")


@dataclass(frozen=True)
class LrCutoffs:
    A: float
    B: float

    def __post_init__(self):
        if not 0 <= self.A < self.B:
            raise ValueError("need 0 <= A < B")


DEFAULT_WRAP = WrapParams()


def wrap(z, params=DEFAULT_WRAP):
    """Apply the wrapping transformation elementwise."""
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    mid = params.q1 * np.tanh(params.q2 * (params.c - a)) * np.sign(z)
    return np.where(a <= params.b, z, np.where(a <= params.c, mid, 0.0))


def wrap_scalar(z, params=DEFAULT_WRAP):
    return float(wrap(z, params))


def wrapped_covariance(Z, params=DEFAULT_WRAP):
    """Classical covariance (denominator n - 1) of the wrapped data."""
    W = wrap(Z, params)
    W = W - W.mean(axis=0)
    S = W.T @ W / (len(W) - 1)
    return 0.5 * (S + S.T)


def lr_cutoffs(norms):
    """Default cutoffs for the linearly redescending weight function.

    ``A`` is the median of the norms and ``B = A + 1.5 * IQR``, with
    quantiles by linear interpolation between order statistics.
    """
    norms = np.asarray(norms, dtype=float)
    q1, med, q3 = np.percentile(norms, [25, 50, 75])
    iqr = q3 - q1
    if not iqr > 0:
        raise DegenerateNorms("norms have zero interquartile range")
    return LrCutoffs(float(med), float(med + 1.5 * iqr))


def lr_weights(r, cutoffs):
    r = np.asarray(r, dtype=float)
    A, B = cutoffs.A, cutoffs.B
    return np.clip((B - r) / (B - A), 0.0, 1.0)


def gsscm_lr(Z, cutoffs=None):
    """Linearly redescending generalized spatial sign covariance matrix.

    ``(1/n) * sum_i xi(||z_i||)**2 z_i z_i^T`` with ``xi = 1`` up to ``A``,
    decreasing linearly to zero at ``B``. Cutoffs default to
    :func:`lr_cutoffs` of the row norms.
    """
    Z = np.asarray(Z, dtype=float)
    r = np.sqrt(np.einsum("ij,ij->i", Z, Z))
    if cutoffs is None:
        cutoffs = lr_cutoffs(r)
    xi = lr_weights(r, cutoffs)
    if not xi.any():
        raise AllWeightsZero("all GSSCM weights are zero")
    Zw = Z * xi[:, None]
    S = Zw.T @ Zw / len(Z)
    return 0.5 * (S + S.T)
