"""Eigenvalue refinement of an initial scatter estimate."""

from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned
from .numerics import sym_eigen
from .univariate import uni_mcd_columns

KAPPA_MAX = 1000.0


@dataclass(frozen=True)
class RefinedFit:
    center: np.ndarray
    scatter: np.ndarray
    condition: float


def refine(S_init, Z, kappa_max=KAPPA_MAX):
    """Turn a rough scatter estimate into a usable (center, scatter) start.

    The eigenvectors of `S_init` are kept. Each eigenvalue is replaced by the
    squared reweighted univariate MCD scale of the data projected on its
    eigenvector. The center is the univariate MCD location of the data after
    sphering with the refined scatter, mapped back to the original frame.

    Raises
    ------
    IllConditioned
        If the eigenvalue ratio of `S_init` is at least `kappa_max`, or its
        smallest eigenvalue is not positive.
    DegenerateScale
        If a projection has zero robust scale.
    """
    Z = np.asarray(Z, dtype=float)
    lam, V = sym_eigen(S_init)
    if lam[-1] <= 0:
        raise IllConditioned(np.inf)
    cond = lam[0] / lam[-1]
    if cond >= kappa_max:
        raise IllConditioned(cond)

    _, scales = uni_mcd_columns(Z @ V)
    d = scales**2
    scatter = (V * d) @ V.T
    scatter = 0.5 * (scatter + scatter.T)

    # sphere with scatter^(-1/2) = V diag(d^-1/2) V^T, which shares V
    inv_root = (V / np.sqrt(d)) @ V.T
    root = (V * np.sqrt(d)) @ V.T
    locs, _ = uni_mcd_columns(Z @ inv_root)
    center = root @ locs
    return RefinedFit(center, scatter, float(cond))
