"""Single-pass pooling of means and sscp matrices from disjoint groups."""

from dataclasses import dataclass

import numpy as np


@dataclass
class PooledState:
    """Running mean, sscp matrix and count of the union of pooled groups."""

    sscp: np.ndarray
    center: np.ndarray
    count: int

    @classmethod
    def from_moments(cls, center, sscp, count):
        return cls(np.array(sscp, dtype=float), np.array(center, dtype=float), int(count))

    @classmethod
    def from_fit(cls, center, scatter, count):
        """Start from a (center, covariance) summary of `count` observations."""
        return cls.from_moments(center, (count - 1) * np.asarray(scatter), count)

    def fold(self, center, sscp, count):
        """Merge another group given its mean, sscp matrix and size."""
        if count == 0:
            return self
        if self.count == 0:
            self.center = np.array(center, dtype=float)
            self.sscp = np.array(sscp, dtype=float)
            self.count = int(count)
            return self
        n, m = self.count, int(count)
        diff = np.asarray(center) - self.center
        self.sscp = self.sscp + sscp + np.outer(diff, diff) * (n * m / (n + m))
        self.center = (n * self.center + m * np.asarray(center)) / (n + m)
        self.count = n + m
        return self

    def fold_fit(self, center, scatter, count):
        return self.fold(center, (count - 1) * np.asarray(scatter), count)

    @property
    def scatter(self):
        S = self.sscp / (self.count - 1)
        return 0.5 * (S + S.T)


def group_moments(Z, mask=None):
    """(count, mean, sscp) of the rows of `Z` (optionally only those in `mask`)."""
    Zs = Z if mask is None else Z[mask]
    k = len(Zs)
    p = Z.shape[1]
    if k == 0:
        return 0, np.zeros(p), np.zeros((p, p))
    mu = Zs.mean(axis=0)
    D = Zs - mu
    sscp = D.T @ D
    return k, mu, 0.5 * (sscp + sscp.T)
