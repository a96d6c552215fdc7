import numpy as np
import pytest

from conftest import random_spd
from rtdetmcd.errors import IllConditioned
from rtdetmcd.initial import gsscm_lr, wrapped_covariance
from rtdetmcd.numerics import sym_eigen, sym_power
from rtdetmcd.refinement import refine


def test_identity_start_on_gaussian():
    Z = np.random.default_rng(0).standard_normal((100_000, 4))
    fit = refine(np.eye(4), Z)
    np.testing.assert_allclose(fit.scatter, np.eye(4), atol=0.05)
    np.testing.assert_allclose(fit.center, 0, atol=0.02)
    assert fit.condition == pytest.approx(1.0)


def test_ill_conditioned_start():
    Z = np.random.default_rng(1).standard_normal((500, 2))
    with pytest.raises(IllConditioned) as exc:
        refine(np.diag([1.0, 1e-6]), Z, kappa_max=1000)
    assert exc.value.condition == pytest.approx(1e6)
    with pytest.raises(IllConditioned):
        refine(np.diag([1.0, 0.0]), Z)


def test_duplicated_column_rejected():
    rng = np.random.default_rng(2)
    Z = rng.standard_normal((1000, 3))
    Z = np.column_stack([Z, Z[:, 0]])
    for S in (wrapped_covariance(Z), gsscm_lr(Z)):
        with pytest.raises(IllConditioned):
            refine(S, Z)


def test_keeps_eigenvectors_and_sphering_roundtrip():
    rng = np.random.default_rng(3)
    p = 4
    S0 = np.diag([8.0, 4.0, 2.0, 1.0])
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    S0 = Q @ S0 @ Q.T
    Z = rng.standard_normal((5000, p)) @ sym_power(S0, 0.5)
    fit = refine(S0, Z)
    _, Vin = sym_eigen(S0)
    _, Vout = sym_eigen(fit.scatter)
    M = np.abs(Vout.T @ Vin)
    np.testing.assert_allclose(np.sort(M, axis=1)[:, -1], 1, atol=1e-8)
    np.testing.assert_allclose(np.sort(M, axis=1)[:, :-1], 0, atol=1e-8)
    R = sym_power(fit.scatter, -0.5)
    np.testing.assert_allclose(R @ fit.scatter @ R, np.eye(p), atol=1e-8)


def test_converges_to_multiple_of_truth():
    rng = np.random.default_rng(4)
    S0 = random_spd(rng, 3, cond=20)
    errs = []
    for n in (1_000, 10_000, 100_000):
        Z = rng.standard_normal((n, 3)) @ sym_power(S0, 0.5)
        S = refine(S0, Z).scatter
        R = S / np.trace(S) * np.trace(S0)
        errs.append(np.abs(R - S0).max())
    assert errs[2] < errs[0]
    assert errs[2] < 0.05
