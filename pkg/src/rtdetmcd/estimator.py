"""Serial RT-DetMCD: standardize, two deterministic starts, refine, concentrate,
keep the lowest determinant, reweight, flag.

The ``variant`` setting selects how concentration steps are executed:

======= ==================================================
``I``   full recomputation with explicit inverses
``ID``  Cholesky-based distances and determinants
``IDC`` Cholesky plus update-based subset moments (default)
======= ==================================================

All three visit the same h-subsets; they differ only in speed and round-off.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .concentration import converge
from .errors import (
    BothStartsFailed,
    MCDError,
    NoInliers,
    SingularCandidate,
    WidthMismatch,
)
from .initial import DEFAULT_WRAP, LrCutoffs, WrapParams, gsscm_lr, wrapped_covariance
from .numerics import chi2_quantile, cholesky, consistency_factor
from .pooling import PooledState, group_moments
from .refinement import refine
from .univariate import ColumnScaling, check_finite, standardize

VARIANT_STRATEGY = {"I": "full", "ID": "cholesky", "IDC": "update"}
START_TAGS = ("wrapped", "gsscm")


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning of the serial estimator.

    ``rew_correction`` picks how the reweighted scatter is made consistent:
    ``"median"`` rescales it so the median squared robust distance of all
    observations equals the chi-squared median (the FastMCD convention);
    ``"theoretical"`` multiplies by the Gaussian truncation factor for
    `flag_quantile`.
    """

    alpha: float = 0.5
    kappa_max: float = 1000.0
    flag_quantile: float = 0.975
    variant: str = "IDC"
    wrap_params: WrapParams = DEFAULT_WRAP
    lr_cutoffs: LrCutoffs = None
    max_iter: int = 100
    rew_correction: str = "median"

    def __post_init__(self):
        if not 0.5 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0.5, 1), got {self.alpha}")
        if not 0 < self.flag_quantile < 1:
            raise ValueError("flag_quantile must lie in (0, 1)")
        if self.variant not in VARIANT_STRATEGY:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.rew_correction not in ("median", "theoretical"):
            raise ValueError(f"unknown rew_correction {self.rew_correction!r}")
        if self.kappa_max <= 1:
            raise ValueError("kappa_max must exceed 1")

    @property
    def strategy(self):
        return VARIANT_STRATEGY[self.variant]

    def coverage(self, n):
        return int(np.floor(self.alpha * n))

    def cutoff(self, p):
        return float(np.sqrt(chi2_quantile(p, self.flag_quantile)))


@dataclass(frozen=True)
class ReweightedFit:
    """Raw and reweighted MCD estimates, stored in the standardized frame."""

    center_raw: np.ndarray
    scatter_raw: np.ndarray
    center_rew: np.ndarray
    scatter_rew: np.ndarray
    scaling: ColumnScaling
    chosen_start: str
    weights: np.ndarray
    rew_factor: float = 1.0
    config: EstimatorConfig = None
    candidates: dict = field(default_factory=dict, repr=False)

    @property
    def p(self):
        return len(self.center_rew)


@dataclass(frozen=True)
class OutlierReport:
    distances: np.ndarray
    flags: np.ndarray
    cutoff: float

    @property
    def n_outliers(self):
        return int(self.flags.sum())


@dataclass(frozen=True)
class Start:
    center: np.ndarray
    scatter: np.ndarray


def _sq_distances(Z, center, scatter):
    L = cholesky(scatter)
    return _kernels.sq_dist_chol(np.ascontiguousarray(Z), np.asarray(center, float), L)


def initial_starts(Z, config):
    """Refined wrapped-covariance and GSSCM starts; failed ones map to the error."""
    starts = {}
    builders = {
        "wrapped": lambda: wrapped_covariance(Z, config.wrap_params),
        "gsscm": lambda: gsscm_lr(Z, config.lr_cutoffs),
    }
    for tag in START_TAGS:
        try:
            starts[tag] = refine(builders[tag](), Z, config.kappa_max)
        except MCDError as exc:
            starts[tag] = exc
    return starts


def raw_fit(Z, config, starts=None):
    """Concentrate every usable start and keep the lowest-determinant candidate.

    Returns ``(tag, candidate, candidates)`` where ``candidates`` maps each
    start tag to its :class:`CandidateResult` or to the exception that
    eliminated it.

    Raises
    ------
    BothStartsFailed
    """
    n = len(Z)
    h = config.coverage(n)
    if h <= Z.shape[1]:
        raise ValueError(f"coverage h={h} must exceed p={Z.shape[1]}")
    if starts is None:
        starts = initial_starts(Z, config)
    candidates = {}
    for tag, start in starts.items():
        if isinstance(start, Exception):
            candidates[tag] = start
            continue
        try:
            candidates[tag] = converge(
                Z, start, h, config.kappa_max, config.strategy, config.max_iter
            )
        except SingularCandidate as exc:
            candidates[tag] = exc
    ok = {t: c for t, c in candidates.items() if not isinstance(c, Exception)}
    if not ok:
        reasons = "; ".join(f"{t}: {c}" for t, c in candidates.items())
        raise BothStartsFailed(f"no usable start ({reasons})")
    tag = min(ok, key=lambda t: ok[t].log_det)
    return tag, ok[tag], candidates


def reweight_blocks(blocks, center_raw, scatter_raw, config, map_fn=map):
    """Reweighting pass over disjoint row blocks.

    Each block computes raw distances, its inlier mask and the mean/sscp of
    its inliers; the results are pooled in block order. Returns the pooled
    state and the per-block weight masks.
    """
    p = len(center_raw)
    cut2 = config.cutoff(p) ** 2

    def local(Zl):
        w = _sq_distances(Zl, center_raw, scatter_raw) <= cut2
        return w, group_moments(Zl, w)

    results = list(map_fn(local, blocks))
    pooled = PooledState(np.zeros((p, p)), np.zeros(p), 0)
    for _, (k, mu, sscp) in results:
        pooled.fold(mu, sscp, k)
    if pooled.count <= p:
        raise NoInliers(f"only {pooled.count} observations within the cutoff")
    return pooled, [w for w, _ in results]


def rew_correction(sq_dists, p, config):
    """Consistency factor for the reweighted scatter (see EstimatorConfig)."""
    if config.rew_correction == "median":
        return float(np.median(sq_dists) / chi2_quantile(p, 0.5))
    return consistency_factor(config.flag_quantile, p)


def _to_frame(fit, scaling):
    """Express a previous fit's reweighted estimate in the frame of `scaling`."""
    center, scatter = destandardized_fit(fit)
    s = scaling.scale
    return Start((center - scaling.location) / s, scatter / np.outer(s, s))


def fit_serial(X, config=None, warm_start=None):
    """Fit the reweighted deterministic MCD to the rows of `X`.

    Parameters
    ----------
    X : array_like, shape (n, p)
        Requires ``n > 2p`` and finite entries.
    config : EstimatorConfig, optional
    warm_start : ReweightedFit, optional
        A previous fit used as the only concentration start, skipping the
        initial estimators.

    Returns
    -------
    ReweightedFit
        Estimates in the standardized frame; see :func:`destandardized_fit`.
    """
    config = config or EstimatorConfig()
    X = check_finite(X)
    Z, scaling = standardize(X)
    Z = np.ascontiguousarray(Z)
    p = Z.shape[1]

    starts = None
    if warm_start is not None:
        starts = {"warm": _to_frame(warm_start, scaling)}
    tag, cand, candidates = raw_fit(Z, config, starts)

    pooled, (weights,) = reweight_blocks([Z], cand.center, cand.scatter, config)
    center_w, scatter_w = pooled.center, pooled.scatter
    factor = rew_correction(_sq_distances(Z, center_w, scatter_w), p, config)
    return ReweightedFit(
        center_raw=cand.center,
        scatter_raw=cand.scatter,
        center_rew=center_w,
        scatter_rew=factor * scatter_w,
        scaling=scaling,
        chosen_start=tag,
        weights=weights,
        rew_factor=factor,
        config=config,
        candidates=candidates,
    )


def flag(X_new, fit, config=None):
    """Robust distances of new rows under a fit, flagged against the cutoff."""
    X_new = check_finite(np.atleast_2d(X_new))
    if X_new.shape[1] != fit.p:
        raise WidthMismatch(f"expected {fit.p} columns, got {X_new.shape[1]}")
    quantile = (config or fit.config or EstimatorConfig()).flag_quantile
    Z = np.ascontiguousarray(fit.scaling.apply(X_new))
    L = cholesky(fit.scatter_rew)
    if len(Z) >= 100_000:
        d2 = _kernels.sq_dist_chol_par(Z, fit.center_rew, L)
    else:
        d2 = _kernels.sq_dist_chol(Z, fit.center_rew, L)
    d = np.sqrt(d2)
    cutoff = float(np.sqrt(chi2_quantile(fit.p, quantile)))
    return OutlierReport(d, d > cutoff, cutoff)


def destandardized_fit(fit, raw=False):
    """Center and scatter of a fit in the original data units."""
    loc, s = fit.scaling.location, fit.scaling.scale
    center = fit.center_raw if raw else fit.center_rew
    scatter = fit.scatter_raw if raw else fit.scatter_rew
    return loc + s * center, scatter * np.outer(s, s)
