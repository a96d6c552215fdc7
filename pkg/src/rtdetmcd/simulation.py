"""Simulation harness: scatter generators, contamination, accuracy and timing.

Random streams come from numpy's PCG64. A scenario seed is expanded with
``SeedSequence(seed).spawn(replications)``; replication ``r`` draws its
covariance (ALYZ), clean data, contamination and partition seed, in that
order, from child stream ``r``.
"""

import re
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import MCDError, NotPositiveDefinite
from .estimator import EstimatorConfig, destandardized_fit, fit_serial, flag
from .numerics import cholesky, log_det, sym_eigen, sym_power

SIGMA_TYPES = ("A09", "ALYZ")
CONTAMINATIONS = ("none", "point", "shift", "cluster")
CLUSTER_SD = 0.05


def gen_sigma_a09(p):
    """Correlation matrix with entries ``(-0.9) ** |j - k|``."""
    idx = np.arange(p)
    return (-0.9) ** np.abs(idx[:, None] - idx[None, :])


def _cov2cor(S):
    d = np.sqrt(np.diag(S))
    R = S / np.outer(d, d)
    np.fill_diagonal(R, 1.0)
    return 0.5 * (R + R.T)


def _random_orthogonal(p, rng):
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    return Q * np.sign(np.diag(R))


def gen_sigma_alyz(p, rng, method="alyz", cn=100.0, max_attempts=100, tol=1e-6):
    """Random correlation matrix with relatively weak correlations.

    ``method="alyz"`` follows the construction of Agostinelli, Leung, Yohai
    and Zamar (2015) as reconstructed here: eigenvalues 1, `cn` and ``p - 2``
    uniform draws in between on a random orthogonal basis, converted to a
    correlation matrix, then alternately setting the smallest eigenvalue to
    ``largest / cn`` and rescaling to unit diagonal until the condition
    number is `cn` to relative tolerance `tol`. ``method="fallback"`` uses a random
    orthogonal basis with eigenvalues log-uniform on [1, 10], converted to a
    correlation matrix.

    Raises
    ------
    NotPositiveDefinite
        If no positive definite matrix was produced in `max_attempts` tries.
    """
    if p < 2:
        raise ValueError("need p >= 2")
    for _ in range(max_attempts):
        Q = _random_orthogonal(p, rng)
        if method == "fallback":
            lam = np.exp(rng.uniform(0.0, np.log(10.0), p))
            R = _cov2cor((Q * lam) @ Q.T)
        elif method == "alyz":
            lam = np.concatenate([[1.0, cn], rng.uniform(1.0, cn, p - 2)])
            R = _cov2cor((Q * lam) @ Q.T)
            for _ in range(1000):
                w, V = sym_eigen(R)
                if w[-1] > 0 and abs(w[0] / w[-1] - cn) < tol * cn:
                    break
                # reset the smallest eigenvalue to largest / cn (up or down)
                w = np.maximum(w, w[0] / cn)
                w[-1] = w[0] / cn
                R = _cov2cor((V * w) @ V.T)
        else:
            raise ValueError(f"unknown method {method!r}")
        try:
            cholesky(R)
        except NotPositiveDefinite:
            continue
        return R
    raise NotPositiveDefinite(f"no positive definite draw in {max_attempts} attempts")


def gaussian_sample(n, sigma, rng, center=None):
    """``n`` draws from ``N(center, sigma)`` as ``standard_normal @ sigma^(1/2)``."""
    p = len(sigma)
    X = rng.standard_normal((n, p)) @ sym_power(sigma, 0.5)
    if center is not None:
        X += center
    return X


def outlier_direction(sigma):
    """Last eigenvector of `sigma` scaled so that ``v' sigma^-1 v = p``.

    Its sign is fixed so the entry of largest magnitude is positive.
    """
    _, V = sym_eigen(sigma)
    v = V[:, -1]
    v = v * np.sign(v[np.argmax(np.abs(v))])
    p = len(v)
    return v * np.sqrt(p / (v @ np.linalg.solve(sigma, v)))


def contaminate(clean, sigma, kind, eps, gamma, rng):
    """Replace ``floor(eps * n)`` random rows by outliers.

    Outliers sit at ``gamma * v`` (see :func:`outlier_direction`):
    ``"point"`` puts all of them exactly there, ``"shift"`` draws them from
    ``N(gamma v, sigma)`` and ``"cluster"`` from ``N(gamma v, 0.05**2 I)``.

    Returns
    -------
    X : ndarray
    truth : ndarray of bool
        True for replaced rows.
    """
    X = np.array(clean, dtype=float)
    n, p = X.shape
    k = int(np.floor(eps * n))
    truth = np.zeros(n, dtype=bool)
    if k == 0 or kind == "none":
        return X, truth
    idx = rng.choice(n, size=k, replace=False)
    truth[idx] = True
    mu = gamma * outlier_direction(sigma)
    if kind == "point":
        X[idx] = mu
    elif kind == "shift":
        X[idx] = gaussian_sample(k, sigma, rng, mu)
    elif kind == "cluster":
        X[idx] = mu + CLUSTER_SD * rng.standard_normal((k, p))
    else:
        raise ValueError(f"unknown contamination {kind!r}")
    return X, truth


def kl_metric(estimate, truth):
    """``trace(S T^-1) - p - log det(S T^-1)`` for estimate S and truth T."""
    estimate = np.asarray(estimate, dtype=float)
    L = cholesky(truth)
    M = np.linalg.solve(truth, estimate)
    sign, ld = np.linalg.slogdet(estimate)
    if sign <= 0:
        return np.inf
    return float(np.trace(M) - len(M) - (ld - log_det(L)))


def parse_variant(variant):
    """Split ``"IDCP4"`` into ``("IDCP", 4)``; serial variants give ``q=None``."""
    m = re.fullmatch(r"(I|ID|IDC|IDCP)(\d*)", variant)
    if not m:
        raise ValueError(f"unknown variant {variant!r}")
    name, q = m.groups()
    if q and name != "IDCP":
        raise ValueError(f"only IDCP takes a block count: {variant!r}")
    return name, int(q) if q else None


def _shallow(conf):
    return {f.name: getattr(conf, f.name) for f in fields(conf)}


def fit_variant(X, variant, omega=4096, seed=0, max_threads=None, config=None):
    """Fit `X` with a named variant; returns ``(fit, report)``."""
    from .parallel import ParallelConfig, fit_parallel

    name, q = parse_variant(variant)
    if name == "IDCP":
        base = config or EstimatorConfig()
        pconf = ParallelConfig(
            **{**_shallow(base), "variant": "IDC"},
            omega=omega, q_override=q, seed=seed,
            max_threads=max_threads,
        )
        return fit_parallel(X, pconf)
    conf = config or EstimatorConfig()
    if conf.variant != name:
        conf = EstimatorConfig(**{**_shallow(conf), "variant": name})
    fit = fit_serial(X, conf)
    return fit, flag(X, fit, conf)


@dataclass(frozen=True)
class Scenario:
    n: int
    p: int
    sigma_type: str = "A09"
    contamination: str = "point"
    eps: float = 0.1
    gamma: float = 50.0
    variant: str = "IDC"
    omega: int = 4096
    replications: int = 50
    seed: int = 0
    alpha: float = 0.5
    sigma_method: str = "alyz"

    def __post_init__(self):
        if self.sigma_type not in SIGMA_TYPES:
            raise ValueError(f"unknown sigma_type {self.sigma_type!r}")
        if self.contamination not in CONTAMINATIONS:
            raise ValueError(f"unknown contamination {self.contamination!r}")
        if not 0 <= self.eps < 0.5:
            raise ValueError("eps must lie in [0, 0.5)")
        if self.eps >= 1 - self.alpha:
            raise ValueError("eps must be below the breakdown value 1 - alpha")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        parse_variant(self.variant)

    @property
    def sigma_generator(self):
        if self.sigma_type == "A09":
            return "A09"
        return "ALYZ-cn100" if self.sigma_method == "alyz" else "ALYZ-fallback"


@dataclass
class ScenarioResult:
    scenario: Scenario
    mean_kl: float
    mean_runtime: float
    detection_recall: float
    false_positive_rate: float
    records: list = field(default_factory=list, repr=False)
    failures: int = 0
    speedup: float = None
    baseline: str = None


def _replication(s, rng, max_threads):
    if s.sigma_type == "A09":
        sigma = gen_sigma_a09(s.p)
    else:
        sigma = gen_sigma_alyz(s.p, rng, s.sigma_method)
    X = gaussian_sample(s.n, sigma, rng)
    X, truth = contaminate(X, sigma, s.contamination, s.eps, s.gamma, rng)
    part_seed = int(rng.integers(2**63))
    return sigma, X, truth, part_seed


def _timed_fit(X, variant, s, part_seed, max_threads):
    config = EstimatorConfig(alpha=s.alpha)
    t0 = time.perf_counter()
    fit, report = fit_variant(X, variant, s.omega, part_seed, max_threads, config)
    return fit, report, time.perf_counter() - t0


def run_scenario(s, baseline="I", max_threads=None):
    """Run all replications of a scenario sequentially.

    Each replication records the KL deviation of the de-standardized
    reweighted scatter from the true one, the fit+flag wall time, and the
    recall / false-positive rate of the flags against the contamination
    truth. Recall is NaN when there is no contamination. With `baseline`
    (a variant name, default ``"I"``; None disables it) the baseline is
    also timed on the same data and
    ``speedup = mean baseline time / mean time``.
    """
    records = []
    failures = 0
    base_times = []
    for child in np.random.SeedSequence(s.seed).spawn(s.replications):
        rng = np.random.Generator(np.random.PCG64(child))
        sigma, X, truth, part_seed = _replication(s, rng, max_threads)
        try:
            fit, report, dt = _timed_fit(X, s.variant, s, part_seed, max_threads)
        except MCDError as exc:
            failures += 1
            records.append({"error": repr(exc)})
            continue
        _, scatter = destandardized_fit(fit)
        flags = report.flags
        records.append({
            "kl": kl_metric(scatter, sigma),
            "runtime": dt,
            "recall": float(flags[truth].mean()) if truth.any() else np.nan,
            "fpr": float(flags[~truth].mean()),
        })
        if baseline is not None:
            base_times.append(_timed_fit(X, baseline, s, part_seed, max_threads)[2])

    ok = [r for r in records if "error" not in r]

    def mean(key):
        vals = [r[key] for r in ok]
        return float(np.mean(vals)) if vals and not np.all(np.isnan(vals)) else np.nan

    result = ScenarioResult(
        scenario=s,
        mean_kl=mean("kl"),
        mean_runtime=mean("runtime"),
        detection_recall=mean("recall"),
        false_positive_rate=mean("fpr"),
        records=records,
        failures=failures,
    )
    if baseline is not None and ok:
        result.baseline = baseline
        result.speedup = float(np.mean(base_times) / result.mean_runtime)
    return result
