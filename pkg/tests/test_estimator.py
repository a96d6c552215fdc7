import numpy as np
import pytest

from rtdetmcd.concentration import robust_distances
from rtdetmcd.errors import BothStartsFailed, InvalidValue, WidthMismatch
from rtdetmcd.estimator import (
    EstimatorConfig,
    ReweightedFit,
    destandardized_fit,
    fit_serial,
    flag,
)
from rtdetmcd.numerics import chi2_quantile, consistency_factor
from rtdetmcd.simulation import contaminate, gaussian_sample, gen_sigma_a09, kl_metric
from rtdetmcd.univariate import ColumnScaling


@pytest.fixture(scope="module")
def a09_fit():
    rng = np.random.default_rng(10)
    sigma = gen_sigma_a09(4)
    X = gaussian_sample(20_000, sigma, rng)
    X, truth = contaminate(X, sigma, "point", 0.3, 50.0, rng)
    return X, truth, sigma, fit_serial(X)


def test_point_contamination_fit(a09_fit):
    X, truth, sigma, fit = a09_fit
    _, S = destandardized_fit(fit)
    assert 0.25 < kl_metric(S, sigma) < 0.5
    assert not fit.weights[truth].any()
    assert fit.chosen_start in ("wrapped", "gsscm")


def test_weights_follow_raw_distances(a09_fit):
    X, _, _, fit = a09_fit
    Z = fit.scaling.apply(X)
    d = robust_distances(Z, fit.center_raw, fit.scatter_raw)
    np.testing.assert_array_equal(fit.weights, d <= np.sqrt(chi2_quantile(4, 0.975)))


def test_flag_examples(a09_fit):
    X, truth, sigma, fit = a09_fit
    center, _ = destandardized_fit(fit)
    rep = flag(np.tile(center, (3, 1)), fit)
    np.testing.assert_allclose(rep.distances, 0, atol=1e-12)
    assert not rep.flags.any()
    # tail mass needs an accurate fit; the 30%-contaminated one is inflated
    rng = np.random.default_rng(11)
    accurate = fit_serial(gaussian_sample(20_000, sigma, rng))
    clean = gaussian_sample(200_000, sigma, rng)
    assert abs(flag(clean, accurate).flags.mean() - 0.025) < 0.01
    out = flag(X[truth][:100], fit)
    assert out.flags.all()
    np.testing.assert_array_equal(out.flags, out.distances > out.cutoff)
    with pytest.raises(WidthMismatch):
        flag(X[:, :3], fit)
    bad = X[:5].copy()
    bad[2, 0] = np.inf
    with pytest.raises(InvalidValue):
        flag(bad, fit)


def test_destandardized_examples():
    fit = ReweightedFit(np.zeros(2), np.eye(2), np.zeros(2), np.eye(2),
                        ColumnScaling.identity(2), "wrapped", np.ones(3, bool))
    c, S = destandardized_fit(fit)
    np.testing.assert_array_equal(c, 0)
    np.testing.assert_array_equal(S, np.eye(2))
    fit = ReweightedFit(np.zeros(2), np.eye(2), np.zeros(2), np.eye(2),
                        ColumnScaling(np.ones(2), np.full(2, 2.0)), "wrapped", np.ones(3, bool))
    c, S = destandardized_fit(fit)
    np.testing.assert_array_equal(c, [1, 1])
    np.testing.assert_array_equal(S, np.diag([4.0, 4.0]))


def test_standardize_roundtrip_units(a09_fit):
    X, _, _, fit = a09_fit
    Z = fit.scaling.apply(X)
    np.testing.assert_allclose(fit.scaling.invert(Z), X, atol=1e-8)


def test_affine_equivariance():
    rng = np.random.default_rng(12)
    X = gaussian_sample(3000, gen_sigma_a09(3), rng)
    X[:300] += 8
    a = np.array([5.0, -2.0, 100.0])
    b = np.array([3.0, -0.5, 0.01])
    fit = fit_serial(X)
    Y = a + b * X
    fit_y = fit_serial(Y)
    np.testing.assert_array_equal(flag(Y, fit_y).flags, flag(X, fit).flags)
    c, S = destandardized_fit(fit)
    cy, Sy = destandardized_fit(fit_y)
    np.testing.assert_allclose(cy, a + b * c, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(Sy, S * np.outer(b, b), rtol=1e-8, atol=1e-12)


def test_variant_agreement():
    rng = np.random.default_rng(13)
    for _ in range(100):
        p = int(rng.integers(2, 6))
        n = int(rng.integers(20 * p, 600))
        X = gaussian_sample(n, gen_sigma_a09(p), rng)
        X, _ = contaminate(X, gen_sigma_a09(p), "shift", rng.uniform(0, 0.3), 10.0, rng)
        fits = {v: fit_serial(X, EstimatorConfig(variant=v)) for v in ("I", "ID", "IDC")}
        flags = {v: flag(X, f).flags for v, f in fits.items()}
        for v in ("ID", "IDC"):
            np.testing.assert_array_equal(flags[v], flags["I"])
            np.testing.assert_allclose(fits[v].center_rew, fits["I"].center_rew, rtol=1e-6, atol=1e-9)
            np.testing.assert_allclose(fits[v].scatter_rew, fits["I"].scatter_rew, rtol=1e-6, atol=1e-9)


def test_lowest_determinant_start_chosen(a09_fit):
    _, _, _, fit = a09_fit
    ok = {t: c for t, c in fit.candidates.items() if not isinstance(c, Exception)}
    chosen = ok[fit.chosen_start]
    assert all(chosen.log_det <= c.log_det for c in ok.values())


def test_both_starts_fail_on_exact_singularity():
    rng = np.random.default_rng(14)
    t = rng.standard_normal(700)
    line = np.column_stack([t, t])
    rest = rng.standard_normal((300, 2)) * 3
    with pytest.raises(BothStartsFailed):
        fit_serial(np.vstack([line, rest]))


def test_warm_start_reproduces_fit(a09_fit):
    X, _, _, fit = a09_fit
    warm = fit_serial(X, warm_start=fit)
    assert warm.chosen_start == "warm"
    np.testing.assert_array_equal(flag(X, warm).flags, flag(X, fit).flags)
    np.testing.assert_allclose(warm.scatter_rew, fit.scatter_rew, rtol=1e-8)


def test_theoretical_correction_option(a09_fit):
    X, _, _, fit = a09_fit
    th = fit_serial(X, EstimatorConfig(rew_correction="theoretical"))
    assert th.rew_factor == pytest.approx(consistency_factor(0.975, 4))
    np.testing.assert_allclose(th.scatter_rew / th.rew_factor, fit.scatter_rew / fit.rew_factor)


def test_config_validation():
    for kw in ({"alpha": 0.4}, {"alpha": 1.0}, {"flag_quantile": 1.0},
               {"variant": "X"}, {"rew_correction": "x"}, {"kappa_max": 1.0}):
        with pytest.raises(ValueError):
            EstimatorConfig(**kw)
    assert EstimatorConfig(alpha=0.75).coverage(100) == 75
