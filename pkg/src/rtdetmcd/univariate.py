"""Univariate MCD location/scale and robust column standardization."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateColumn, DegenerateScale, InvalidValue
from .numerics import chi2_quantile, consistency_factor

REWEIGHT_QUANTILE = 0.975


class LocScale(NamedTuple):
    location: float
    scale: float


@dataclass(frozen=True)
class ColumnScaling:
    """Per-column robust location and scale used to standardize data."""

    location: np.ndarray
    scale: np.ndarray

    def __len__(self):
        return len(self.location)

    def __getitem__(self, j):
        return LocScale(float(self.location[j]), float(self.scale[j]))

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.location) / self.scale

    def invert(self, Z):
        return np.asarray(Z, dtype=float) * self.scale + self.location

    @classmethod
    def identity(cls, p):
        return cls(np.zeros(p), np.ones(p))


def check_finite(X):
    """Raise :class:`InvalidValue` naming the first row with NaN/Inf."""
    X = np.asarray(X, dtype=float)
    bad = ~np.isfinite(X)
    if bad.any():
        rows = np.flatnonzero(bad.reshape(len(X), -1).any(axis=1))
        raise InvalidValue(int(rows[0]))
    return X


def half_coverage(n):
    return n // 2 + 1


def window_sums_of_squares(ys, h):
    """Sums of squared deviations of every contiguous `h`-window of sorted `ys`.

    Window sums are maintained by a running add/drop update (cumulative sums),
    so all ``n - h + 1`` windows cost O(n) after sorting. `ys` may be 2-D,
    in which case windows run down each column.
    """
    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(ys * ys, axis=0)
    zero = np.zeros((1,) + ys.shape[1:])
    csum = np.concatenate([zero, csum])
    csq = np.concatenate([zero, csq])
    s1 = csum[h:] - csum[:-h]
    s2 = csq[h:] - csq[:-h]
    # scale by h before subtracting so exact ties stay exact
    return (h * s2 - s1 * s1) / h


def _raw_columns(X, h):
    """Raw univariate MCD of each column of `X` (no consistency factor).

    Returns locations, standard deviations and a mask of columns whose
    optimal window has zero spread.
    """
    n = X.shape[0]
    xs = np.sort(X, axis=0)
    # a window whose end points coincide has zero variance and is optimal
    degenerate = (xs[h - 1:] == xs[: n - h + 1]).any(axis=0)
    med = xs[(n - 1) // 2]
    ss = window_sums_of_squares(xs - med, h)
    start = np.argmin(ss, axis=0)
    cols = np.arange(X.shape[1])
    offsets = start[None, :] + np.arange(h)[:, None]
    win = xs[offsets, cols[None, :]]
    loc = win.mean(axis=0)
    sd = win.std(axis=0, ddof=1)
    return loc, sd, degenerate


def _reweighted_columns(X):
    n = X.shape[0]
    h = half_coverage(n)
    loc, sd, degenerate = _raw_columns(X, h)
    sd = sd * np.sqrt(consistency_factor(h / n, 1))
    cut = np.sqrt(chi2_quantile(1, REWEIGHT_QUANTILE))
    with np.errstate(divide="ignore", invalid="ignore"):
        keep = np.abs(X - loc) <= cut * sd
    cnt = keep.sum(axis=0)
    safe = np.maximum(cnt, 2)
    mean = np.where(keep, X, 0.0).sum(axis=0) / safe
    dev = np.where(keep, X - mean, 0.0)
    var = (dev * dev).sum(axis=0) / (safe - 1)
    scale = np.sqrt(var * consistency_factor(REWEIGHT_QUANTILE, 1))
    bad = degenerate | (cnt < 2) | ~(scale > 0)
    return mean, scale, bad


def uni_mcd_raw(x, h, correct=True):
    """Raw univariate MCD with coverage `h`.

    The estimate is the mean and standard deviation of the `h` contiguous
    order statistics with the smallest variance; ties go to the window that
    starts lowest. With ``correct=True`` the scale is multiplied by the
    square root of the Gaussian consistency factor for coverage ``h / n``.

    Raises
    ------
    DegenerateScale
        If the optimal window has zero variance (`h` or more tied values).
    """
    x = check_finite(np.ravel(x))
    n = len(x)
    if n < 2 or not n // 2 + 1 <= h <= n:
        raise ValueError(f"coverage h={h} invalid for n={n}")
    loc, sd, degenerate = _raw_columns(x[:, None], h)
    if degenerate[0]:
        raise DegenerateScale("optimal window has zero variance")
    scale = sd[0]
    if correct:
        scale *= np.sqrt(consistency_factor(h / n, 1))
    return LocScale(float(loc[0]), float(scale))


def uni_mcd_reweighted(x):
    """Reweighted univariate MCD with coverage ``n // 2 + 1``.

    Observations within ``sqrt(chi2_1(0.975))`` raw scales of the raw
    location are kept; their mean and consistency-corrected standard
    deviation are returned.
    """
    x = check_finite(np.ravel(x))
    if len(x) < 2:
        raise ValueError("need at least two observations")
    loc, scale, bad = _reweighted_columns(x[:, None])
    if bad[0]:
        raise DegenerateScale("zero robust scale")
    return LocScale(float(loc[0]), float(scale[0]))


def uni_mcd_columns(X):
    """Reweighted univariate MCD of every column; returns (locations, scales).

    Raises :class:`DegenerateColumn` for the first column with zero scale.
    """
    X = np.asarray(X, dtype=float)
    loc, scale, bad = _reweighted_columns(X)
    if bad.any():
        raise DegenerateColumn(int(np.flatnonzero(bad)[0]))
    return loc, scale


def standardize(X):
    """Center and scale each column by its reweighted univariate MCD.

    Returns
    -------
    Z : ndarray
        Standardized data.
    scaling : ColumnScaling
        The per-column location and scale that were used.
    """
    X = check_finite(X)
    if X.ndim != 2:
        raise ValueError("expected a 2-D data matrix")
    n, p = X.shape
    if n <= 2 * p:
        raise ValueError(f"need n > 2p, got n={n}, p={p}")
    loc, scale = uni_mcd_columns(X)
    scaling = ColumnScaling(loc, scale)
    return scaling.apply(X), scaling
