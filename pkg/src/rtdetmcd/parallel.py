"""Block-parallel RT-DetMCD (variant IDCP_q).

The data are standardized globally and randomly split into `q` blocks. Each
block gets its own raw MCD fit; the fits are summarized by their entrywise
median, the ceil(q/2) fits closest to it (in KL deviation) are pooled into
one raw estimate, and reweighting and flagging are again run block-wise.

Blocks run on a thread pool. Every cross-block reduction folds results in
block-id order, so results do not depend on the number of threads.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BlockTooSmall, MCDError, NotPositiveDefinite, TooFewValidBlocks
from .estimator import (
    EstimatorConfig,
    OutlierReport,
    ReweightedFit,
    _to_frame,
    fit_serial,
    flag,
    initial_starts,
    raw_fit,
    reweight_blocks,
    rew_correction,
)
from .numerics import chi2_quantile, cholesky, log_det
from .pooling import PooledState
from .univariate import check_finite, standardize


@dataclass(frozen=True)
class ParallelConfig(EstimatorConfig):
    """:class:`EstimatorConfig` plus block-partition settings.

    ``omega`` is the minimum number of observations per dimension in a
    block; ``q_override`` fixes the block count; ``max_threads`` defaults to
    the number of CPUs and also caps the automatic block count.
    """

    omega: int = 4096
    q_override: int = None
    max_threads: int = None
    seed: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.omega < 1:
            raise ValueError("omega must be >= 1")
        if self.q_override is not None and self.q_override < 1:
            raise ValueError("q_override must be >= 1")

    @property
    def threads(self):
        return self.max_threads or os.cpu_count() or 1


@dataclass
class BlockFit:
    block_id: int
    m: int
    center: np.ndarray
    scatter: np.ndarray
    log_det: float
    start_tag: str
    kl_to_median: float = np.nan


def choose_q(n, p, omega, max_threads):
    """Number of blocks: ``min(max(n // (p * omega), 1), max_threads)``."""
    return max(min(max(n // (p * omega), 1), max_threads), 1)


def partition(n, q, seed, p=None):
    """Randomly split ``range(n)`` into `q` blocks of ``m = n // q`` indices.

    Returns ``(blocks, remainder)``: a list of `q` index arrays (contiguous
    chunks of one seeded permutation) and the ``n - q*m`` unused indices.

    Raises
    ------
    BlockTooSmall
        If `p` is given and ``m <= 2p``.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    m = n // q
    if m == 0 or (p is not None and m <= 2 * p):
        raise BlockTooSmall(f"blocks of {m} rows are too small for p={p}")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    blocks = [perm[l * m:(l + 1) * m] for l in range(q)]
    return blocks, perm[q * m:]


def entrywise_median(fits):
    """Coordinatewise median of block centers and scatter entries.

    With an even number of fits each entry is the mean of its two central
    order statistics. The scatter median need not be positive definite.
    """
    centers = np.stack([f.center for f in fits])
    scatters = np.stack([f.scatter for f in fits])
    return np.median(centers, axis=0), np.median(scatters, axis=0)


def _kl_parts(A, b, B):
    """Terms of the KL deviation that vary with the second argument."""
    L = cholesky(B)
    Binv = np.linalg.solve(B, np.eye(len(B)))
    return L, Binv, float(np.trace(A @ Binv)), log_det(L)


def kl_deviation(a, A, b, B):
    """KL deviation of (a, A) from (b, B).

    ``trace(A B^-1) - p - log det(A B^-1) + (a - b)' B^-1 (a - b)``.
    Only `B` must be invertible; returns ``inf`` when ``det(A) <= 0``.

    Raises
    ------
    NotPositiveDefinite
        If `B` is not positive definite.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    A = np.asarray(A, float)
    _, Binv, tr, ldB = _kl_parts(A, b, B)
    sign, ldA = np.linalg.slogdet(A)
    if sign <= 0:
        return np.inf
    diff = a - b
    return float(tr - len(a) - (ldA - ldB) + diff @ Binv @ diff)


def rank_by_kl(fits, median):
    """Order block fits by KL deviation from the median summary.

    When the median scatter has non-positive determinant its log-determinant
    is a shared infinite constant; fits are then ranked by the remaining
    terms, which is the same order the finite KL would give. Ties go to the
    lower block id. Fills ``kl_to_median`` on each fit.
    """
    mu_med, S_med = median
    sign, ld_med = np.linalg.slogdet(S_med)
    p = len(mu_med)
    scores = []
    for f in fits:
        _, Binv, tr, ldB = _kl_parts(S_med, f.center, f.scatter)
        diff = mu_med - f.center
        score = tr + ldB + float(diff @ Binv @ diff)
        f.kl_to_median = score - p - ld_med if sign > 0 else np.inf
        scores.append(score)
    order = sorted(range(len(fits)), key=lambda i: (scores[i], fits[i].block_id))
    return [fits[i] for i in order]


def select_and_pool(fits, median=None):
    """Pool the ceil(q/2) block fits closest to the entrywise median.

    The sscp matrix starts at ``(m - 1) * scatter`` of the closest fit with
    count ``m``; each further kept fit is folded in with the single-pass
    pooling identities. Returns ``(PooledState, kept_fits)``.
    """
    if median is None:
        median = entrywise_median(fits)
    ranked = rank_by_kl(fits, median)
    kept = ranked[: math.ceil(len(fits) / 2)]
    first = kept[0]
    pooled = PooledState.from_fit(first.center, first.scatter, first.m)
    for f in kept[1:]:
        pooled.fold_fit(f.center, f.scatter, f.m)
    return pooled, kept


def fit_block(block_id, Zl, config, warm=None):
    """Raw MCD fit of one standardized block (lowest-determinant start)."""
    starts = {"warm": warm} if warm is not None else initial_starts(Zl, config)
    tag, cand, _ = raw_fit(Zl, config, starts)
    return BlockFit(block_id, len(Zl), cand.center, cand.scatter, cand.log_det, tag)


def distributed_reweight(blocks, center_raw, scatter_raw, config, map_fn=map):
    """Block-wise reweighting pooled by actual inlier counts.

    Returns the pooled (uncorrected) weighted state and per-block weights.
    The consistency correction is applied by the caller once, at the end.
    """
    return reweight_blocks(blocks, center_raw, scatter_raw, config, map_fn)


def fit_parallel(X, config=None, warm_start=None):
    """Block-parallel fit plus flags for every row of `X`.

    Falls back to :func:`fit_serial` when the block count is 1. Rows left
    over by the partition do not enter the estimate but are flagged.

    Parameters
    ----------
    X : array_like, shape (n, p)
    config : ParallelConfig, optional
    warm_start : ReweightedFit, optional
        Previous fit used as the single concentration start in each block.

    Returns
    -------
    (ReweightedFit, OutlierReport)

    Raises
    ------
    TooFewValidBlocks
        If more than ``q // 2`` blocks fail.
    """
    config = config or ParallelConfig()
    X = check_finite(X)
    n, p = X.shape
    q = config.q_override or choose_q(n, p, config.omega, config.threads)
    if q == 1:
        fit = fit_serial(X, config, warm_start)
        return fit, flag(X, fit, config)

    Z, scaling = standardize(X)
    Z = np.ascontiguousarray(Z)
    idx_blocks, remainder = partition(n, q, config.seed, p)
    blocks = [np.ascontiguousarray(Z[idx]) for idx in idx_blocks]
    warm = _to_frame(warm_start, scaling) if warm_start is not None else None

    def one(l):
        try:
            return fit_block(l, blocks[l], config, warm)
        except MCDError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=min(config.threads, q)) as pool:
        results = list(pool.map(one, range(q)))
        fits = [r for r in results if isinstance(r, BlockFit)]
        if q - len(fits) > q // 2:
            raise TooFewValidBlocks(f"{q - len(fits)} of {q} blocks failed")

        pooled_raw, kept = select_and_pool(fits)
        center_raw, scatter_raw = pooled_raw.center, pooled_raw.scatter

        pooled, _ = distributed_reweight(blocks, center_raw, scatter_raw, config, pool.map)
        center_w, scatter_w = pooled.center, pooled.scatter

        # one pass over all rows: raw weights, and distances under the
        # weighted fit which the consistency correction only rescales
        L_raw, L_w = _factor(scatter_raw), _factor(scatter_w)
        chunks = idx_blocks + ([remainder] if len(remainder) else [])

        def score(idx):
            Zc = np.ascontiguousarray(Z[idx])
            return (_kernels.sq_dist_chol(Zc, center_raw, L_raw),
                    _kernels.sq_dist_chol(Zc, center_w, L_w))

        scored = list(pool.map(score, chunks))

    d2_w = np.concatenate([s[1] for s in scored[:q]])
    factor = rew_correction(d2_w, p, config)
    cut2 = chi2_quantile(p, config.flag_quantile)
    order = np.concatenate(chunks)
    raw2 = np.empty(n)
    final2 = np.empty(n)
    raw2[order] = np.concatenate([s[0] for s in scored])
    final2[order] = np.concatenate([s[1] for s in scored]) / factor

    fit = ReweightedFit(
        center_raw=center_raw,
        scatter_raw=scatter_raw,
        center_rew=center_w,
        scatter_rew=factor * scatter_w,
        scaling=scaling,
        chosen_start="pooled",
        weights=raw2 <= cut2,
        rew_factor=factor,
        config=config,
        candidates={f"block{f.block_id}": f for f in fits},
    )
    d = np.sqrt(final2)
    cutoff = float(np.sqrt(cut2))
    return fit, OutlierReport(d, d > cutoff, cutoff)


def _factor(S):
    try:
        return cholesky(S)
    except NotPositiveDefinite:
        raise MCDError("pooled scatter is not positive definite") from None
