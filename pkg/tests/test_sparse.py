import itertools
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wmsindy.dynamics import Trajectory, get_system
from wmsindy.metrics import parameter_error
from wmsindy.sparse import DEFAULT_GRID, SparseCoefficients, lambda_grid_search, selection_loss, stls, wsindy_identify


def test_hand_example():
    G = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    xi, active = stls(G, G @ [2.0, 0.0], 0.5)
    np.testing.assert_allclose(xi, [2.0, 0.0], atol=1e-14)
    assert active.tolist() == [True, False]


def test_zero_lambda_is_least_squares(rng):
    G = rng.normal(size=(20, 5))
    b = rng.normal(size=20)
    xi, active = stls(G, b, 0.0)
    assert active.all()
    np.testing.assert_allclose(xi, np.linalg.lstsq(G, b, rcond=None)[0], rtol=1e-12)


def test_zero_rhs_gives_empty_support(rng):
    xi, active = stls(rng.normal(size=(10, 4)), np.zeros(10), 0.1)
    assert not active.any() and not xi.any()


def test_stls_validation():
    with pytest.raises(ValueError):
        stls(np.ones((3, 2)), np.ones(4), 0.1)
    with pytest.raises(ValueError):
        stls(np.ones((3, 2)), np.ones(3), -1.0)
    with pytest.raises(ValueError):
        stls(np.array([[np.nan, 1.0]]), np.ones(1), 0.1)


def test_rank_deficient_is_total():
    G = np.column_stack([np.ones(5), np.ones(5)])
    xi, active = stls(G, np.ones(5), 0.1)
    np.testing.assert_allclose(xi, [0.5, 0.5])


def sparse_problem(seed, H=30, J=6, k=2, noise=0.0):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(H, J))
    xi = np.zeros(J)
    idx = rng.choice(J, k, replace=False)
    xi[idx] = rng.uniform(1, 3, k) * rng.choice([-1, 1], k)
    return G, G @ xi + noise * rng.normal(size=H), xi


@given(seed=st.integers(0, 10_000), lam=st.floats(0.0, 2.0))
def test_fixed_point(seed, lam):
    G, b, _ = sparse_problem(seed, noise=0.3)
    xi, active = stls(G, b, lam)
    if active.any():
        xi2, active2 = stls(G[:, active], b, lam)
        assert active2.all()
        np.testing.assert_allclose(xi2, xi[active], rtol=1e-10, atol=1e-12)


@given(seed=st.integers(0, 10_000), lam=st.floats(0.0, 2.0))
def test_support_monotone(seed, lam):
    G, b, _ = sparse_problem(seed, noise=0.5)
    _, _, history = stls(G, b, lam, return_history=True)
    assert all(a >= c for a, c in zip(history, history[1:]))


@given(seed=st.integers(0, 10_000), c=st.floats(0.01, 100.0))
def test_scale_leaves_mask(seed, c):
    G, b, _ = sparse_problem(seed, noise=0.2)
    assert np.array_equal(stls(G, b, 0.7)[1], stls(c * G, c * b, 0.7)[1])


def best_subset(G, b, k):
    best, arg = np.inf, None
    for cols in itertools.combinations(range(G.shape[1]), k):
        sub = G[:, cols]
        r = np.linalg.norm(sub @ np.linalg.lstsq(sub, b, rcond=None)[0] - b)
        if r < best:
            best, arg = r, set(cols)
    return arg


@pytest.mark.parametrize("seed", range(10))
def test_matches_best_subset(seed):
    G, b, truth = sparse_problem(seed, H=12, J=6, k=int(seed % 4) + 1)
    _, active = stls(G, b, 0.5)
    assert set(np.flatnonzero(active)) == best_subset(G, b, int(active.sum()))


def test_grid_search_recovers_two_sparse():
    G, b, truth = sparse_problem(7, H=40, J=6, k=2)
    lam, xi, active = lambda_grid_search(G, b)
    assert np.array_equal(active, truth != 0)
    best = selection_loss(G, b, xi, active)
    # noise-free LS already zeroes the off-support entries, so the small-lambda end can tie
    assert best <= selection_loss(G, b, *stls(G, b, 1e-3))
    assert best < selection_loss(G, b, *stls(G, b, 1e1))
    # brute force over the whole grid
    losses = [selection_loss(G, b, *stls(G, b, l)) for l in DEFAULT_GRID]
    assert best == pytest.approx(min(losses))


def test_grid_search_scaled_rhs():
    G, b, _ = sparse_problem(8, H=40, J=6, k=3)
    _, xi, active = lambda_grid_search(G, b)
    _, xi10, active10 = lambda_grid_search(G, 10 * b)
    assert np.array_equal(active, active10)
    np.testing.assert_allclose(xi10, 10 * xi, rtol=1e-10)


def test_grid_search_edge_cases(rng):
    G = rng.normal(size=(10, 3))
    assert lambda_grid_search(G, G @ [1.0, 0, 0], [0.25])[0] == 0.25
    lam, xi, active = lambda_grid_search(G, np.zeros(10), [0.1, 5.0])
    assert lam == 5.0 and not active.any()
    with pytest.raises(ValueError):
        lambda_grid_search(G, G @ [1.0, 0, 0], [])


def test_sparse_coefficients_mask():
    sc = SparseCoefficients(np.ones((2, 2)), np.array([[True, False], [False, False]]))
    assert sc.n_active == 1 and sc.xi.sum() == 1


def test_noise_free_lorenz(lorenz_truth):
    system = get_system("lorenz")
    spec = system.library()
    truth = system.true_coefficients(spec)
    res = wsindy_identify(lorenz_truth, spec)
    assert np.array_equal(res.coeffs.active, truth != 0)
    assert parameter_error(truth, res.coeffs.xi) <= 1e-6
    assert len(res.lambdas) == 3 and not res.fallback_used


def test_fixed_lambda(lorenz_truth):
    system = get_system("lorenz")
    spec = system.library()
    res = wsindy_identify(lorenz_truth, spec, lam=0.2)
    assert res.lambdas == [0.2] * 3
    assert np.array_equal(res.coeffs.active, system.true_coefficients(spec) != 0)


def test_heavy_noise_still_finite(lorenz_truth):
    rng = np.random.default_rng(0)
    noisy = lorenz_truth.with_states(lorenz_truth.states + 0.5 * lorenz_truth.states.std(axis=0) * rng.normal(size=lorenz_truth.states.shape))
    res = wsindy_identify(noisy, get_system("lorenz").library())
    assert np.all(np.isfinite(res.coeffs.xi))


def test_constant_data(caplog):
    data = Trajectory(0.0, 0.01, np.full((400, 2), 1.5))
    with caplog.at_level(logging.WARNING):
        res = wsindy_identify(data, get_system("vanderpol").library())
    assert not res.coeffs.active.any() and res.fallback_used
