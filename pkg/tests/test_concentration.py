import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_spd
from rtdetmcd import _kernels
from rtdetmcd.concentration import (
    STRATEGIES,
    converge,
    cstep_once,
    initial_subset,
    robust_distances,
    select_smallest,
    subset_state,
)
from rtdetmcd.errors import ConvergenceWarning, SingularCandidate
from rtdetmcd.estimator import Start
from rtdetmcd.numerics import consistency_factor


def direct_moments(Z, members):
    Zh = Z[members]
    mu = Zh.mean(axis=0)
    D = Zh - mu
    return mu, D.T @ D


def naive_converge(Z, center, scatter, h, max_iter=100):
    """Textbook C-steps with explicit inverses and argsort."""
    P = np.linalg.inv(scatter)
    d = np.einsum("ij,jk,ik->i", Z - center, P, Z - center)
    members = np.sort(np.argsort(d, kind="stable")[:h])
    for _ in range(max_iter):
        mu = Z[members].mean(axis=0)
        S = np.cov(Z[members], rowvar=False)
        P = np.linalg.inv(S)
        d = np.einsum("ij,jk,ik->i", Z - mu, P, Z - mu)
        new = np.sort(np.argsort(d, kind="stable")[:h])
        if np.array_equal(new, members):
            break
        members = new
    return members


def _is_fixed(Z, idx):
    idx = np.array(idx)
    S = np.cov(Z[idx], rowvar=False)
    mu = Z[idx].mean(axis=0)
    d = np.einsum("ij,jk,ik->i", Z - mu, np.linalg.inv(S), Z - mu)
    return np.array_equal(np.sort(np.argsort(d, kind="stable")[:len(idx)]), idx)


def test_robust_distance_examples():
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((20, 3))
    np.testing.assert_allclose(robust_distances(Z, np.zeros(3), np.eye(3)),
                               np.linalg.norm(Z, axis=1), rtol=1e-12)
    assert robust_distances([[2.0]], [0.0], [[4.0]])[0] == pytest.approx(1.0)
    S = random_spd(rng, 3)
    mu = rng.standard_normal(3)
    want = np.sqrt(np.einsum("ij,jk,ik->i", Z - mu, np.linalg.inv(S), Z - mu))
    np.testing.assert_allclose(robust_distances(Z, mu, S), want, rtol=1e-10)
    P = np.linalg.inv(S)
    np.testing.assert_allclose(_kernels.sq_dist_inv(Z, mu, P), want**2, rtol=1e-10)


def test_blocked_kernel_handles_ragged_tail():
    rng = np.random.default_rng(1)
    for n in (1, 15, 16, 17, 33):
        Z = rng.standard_normal((n, 5))
        L = np.linalg.cholesky(random_spd(rng, 5))
        mu = rng.standard_normal(5)
        a = _kernels.sq_dist_chol(Z, mu, L)
        b = _kernels.sq_dist_chol_par(Z, mu, L)
        want = np.einsum("ij,jk,ik->i", Z - mu, np.linalg.inv(L @ L.T), Z - mu)
        np.testing.assert_allclose(a, want, rtol=1e-10)
        np.testing.assert_array_equal(a, b)


def test_select_smallest_ties_by_index():
    d = np.array([3.0, 1.0, 2.0, 2.0, 2.0, 0.5])
    np.testing.assert_array_equal(select_smallest(d, 3), [0, 1, 1, 0, 0, 1])
    np.testing.assert_array_equal(select_smallest(d, 4), [0, 1, 1, 1, 0, 1])


def test_fixed_point_is_returned_unchanged():
    rng = np.random.default_rng(2)
    Z = rng.standard_normal((200, 3))
    res = converge(Z, Start(np.zeros(3), np.eye(3)), 100)
    state = subset_state(Z, res.members, "update")
    for strategy in STRATEGIES:
        assert cstep_once(Z, state, strategy) is state


def test_hand_dataset_update_equals_full():
    rng = np.random.default_rng(3)
    Z = np.round(rng.standard_normal((12, 2)) * 4) / 4
    Z[:3] += 6
    start = Start(np.zeros(2), np.eye(2))
    members = initial_subset(Z, start.center, start.scatter, 7)
    a = subset_state(Z, members, "full")
    b = subset_state(Z, members, "update")
    for _ in range(5):
        a2 = cstep_once(Z, a, "full")
        b2 = cstep_once(Z, b, "update")
        np.testing.assert_array_equal(a2.members, b2.members)
        np.testing.assert_allclose(b2.center, a2.center, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(b2.sscp, a2.sscp, rtol=1e-9, atol=1e-12)
        assert b2.log_det_sscp == pytest.approx(a2.log_det_sscp, rel=1e-9)
        a, b = a2, b2


def _instance(rng, n=None, p=None):
    p = p or int(rng.integers(1, 9))
    n = n or int(rng.integers(max(3 * p, 20), 500))
    Z = rng.standard_normal((n, p)) @ random_spd(rng, p, 30)
    k = int(rng.integers(0, n // 4))
    Z[:k] += rng.uniform(3, 20) * rng.standard_normal(p)
    return Z, int(rng.integers(n // 2, n - 1))


def test_determinant_monotone_and_strategy_equivalence():
    rng = np.random.default_rng(4)
    for _ in range(200):
        Z, h = _instance(rng)
        p = Z.shape[1]
        start = Start(np.median(Z, axis=0), np.cov(Z, rowvar=False) + 0.1 * np.eye(p))
        res = {s: converge(Z, start, h, 1e8, s) for s in STRATEGIES}
        for r in res.values():
            assert np.all(np.diff(r.history) <= 1e-10)
        ref = res["full"]
        for s in ("cholesky", "update"):
            np.testing.assert_array_equal(res[s].members, ref.members)
            np.testing.assert_allclose(res[s].center, ref.center, rtol=1e-8, atol=1e-10)
            np.testing.assert_allclose(res[s].scatter, ref.scatter, rtol=1e-8, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 8))
def test_delta_loop_matches_direct(seed, p):
    rng = np.random.default_rng(seed)
    n = 80
    h = 50
    Z = rng.standard_normal((n, p))
    old = np.zeros(n, bool)
    old[rng.choice(n, h, replace=False)] = True
    new = old.copy()
    k = int(rng.integers(1, 20))
    new[rng.choice(np.flatnonzero(old), k, replace=False)] = False
    new[rng.choice(np.flatnonzero(~old), k, replace=False)] = True
    mu, lam = direct_moments(Z, old)
    leave = np.flatnonzero(old & ~new)
    join = np.flatnonzero(new & ~old)
    hh = _kernels.delta_update(Z, leave, join, mu, lam, h)
    mu2, lam2 = direct_moments(Z, new)
    assert hh == h
    np.testing.assert_allclose(mu, mu2, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(lam, lam2, rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 8))
def test_smw_single_swap(seed, p):
    rng = np.random.default_rng(seed)
    n, h = 60, 35
    Z = rng.standard_normal((n, p))
    old = np.zeros(n, bool)
    old[rng.choice(n, h, replace=False)] = True
    mu, lam = direct_moments(Z, old)
    inv = np.linalg.inv(lam)
    ld = np.linalg.slogdet(lam)[1]
    leave = rng.choice(np.flatnonzero(old), 1)
    join = rng.choice(np.flatnonzero(~old), 1)
    hh, dlog, ok = _kernels.delta_update_smw(Z, leave, join, mu, lam, inv, h)
    assert ok and hh == h
    new = old.copy()
    new[leave] = False
    new[join] = True
    _, lam2 = direct_moments(Z, new)
    np.testing.assert_allclose(inv @ lam2, np.eye(p), atol=1e-8)
    assert ld + dlog == pytest.approx(np.linalg.slogdet(lam2)[1], rel=1e-8, abs=1e-8)


def test_degenerate_best_subset_raises():
    rng = np.random.default_rng(5)
    t = rng.standard_normal(30) * 0.1
    line = np.column_stack([t, 2 * t])
    far = rng.standard_normal((10, 2)) * 50 + 100
    Z = np.vstack([line, far])
    with pytest.raises(SingularCandidate):
        converge(Z, Start(np.zeros(2), np.eye(2)), 20)


def test_toy_brute_force_local_optimum():
    rng = np.random.default_rng(6)
    for _ in range(20):
        Z = rng.standard_normal((10, 2))
        Z[:3] += 3
        start = Start(np.zeros(2), np.eye(2))
        res = converge(Z, start, 6, 1e12, "update")
        want = naive_converge(Z, start.center, start.scatter, 6)
        np.testing.assert_array_equal(np.flatnonzero(res.members), want)
        # exhaustive: the result is one of the C-step fixed points among
        # all C(10, 6) subsets
        optima = [c for c in itertools.combinations(range(10), 6) if _is_fixed(Z, c)]
        assert tuple(want) in optima


def test_clean_gaussian_history_and_scaling():
    rng = np.random.default_rng(7)
    Z = rng.standard_normal((10_000, 2)) @ np.array([[1.0, 0.5], [0.0, 1.0]])
    h = 5000
    res = converge(Z, Start(np.zeros(2), np.eye(2)), h)
    assert res.converged
    assert np.all(np.diff(res.history) <= 1e-10)
    state = subset_state(Z, res.members)
    np.testing.assert_allclose(res.scatter, consistency_factor(h / len(Z), 2) * state.scatter)
    assert res.log_det == pytest.approx(state.log_det)


def test_iteration_cap_warns():
    rng = np.random.default_rng(8)
    Z = rng.standard_normal((400, 3))
    Z[:100] += 4
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        res = converge(Z, Start(np.full(3, 3.0), np.eye(3)), 200, max_iter=1)
    assert not res.converged and res.iterations == 1
    assert any(issubclass(w.category, ConvergenceWarning) for w in rec)
