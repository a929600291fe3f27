"""Variance path simulation and exponential functional tests."""
import numpy as np
import pytest

from volsmile.errors import InvalidGridError, UnstableFunctionalError
from volsmile.vol_process import (VolPathBatch, exp_functional,
                                  integrated_variance, simulate_paths)

GRID = np.linspace(0.0, 1.0, 129)


def test_grid_validation():
    with pytest.raises(InvalidGridError):
        simulate_paths(0.04, 0.0, [0.0], 10, 1, 0.5)
    with pytest.raises(InvalidGridError):
        simulate_paths(0.04, 0.0, [0.0, 0.5, 0.4, 1.0], 10, 1, 0.5)
    with pytest.raises(InvalidGridError):
        simulate_paths(0.04, 0.5, GRID, 10, 1, 0.5)   # grid starts at 0, not 0.5


def test_sigma_zero_paths_constant():
    b = simulate_paths(0.04, 0.0, GRID, 50, 42, sigma_hat=0.0)
    assert np.all(b.values == 0.04)
    np.testing.assert_allclose(integrated_variance(b), 0.04, rtol=1e-14)


def test_martingale_mean():
    b = simulate_paths(0.04, 0.0, np.linspace(0, 1, 65), 100_000, 9, sigma_hat=0.5)
    for k in (16, 32, 64):
        m = b.values[:, k].mean()
        se = b.values[:, k].std(ddof=1) / np.sqrt(b.n_paths)
        assert abs(m - 0.04) < 3 * se


def test_lognormal_law_of_terminal_value():
    b = simulate_paths(0.04, 0.0, np.linspace(0, 1, 65), 100_000, 10, sigma_hat=0.5)
    lv = np.log(b.values[:, -1])
    # Var log v(T) = sh^2 T, E log v(T) = log v0 - sh^2 T / 2
    n = b.n_paths
    var = lv.var(ddof=1)
    se_var = var * np.sqrt(2.0 / (n - 1))
    assert abs(var - 0.25) < 3 * se_var
    se_mean = lv.std(ddof=1) / np.sqrt(n)
    assert abs(lv.mean() - (np.log(0.04) - 0.125)) < 3 * se_mean


def test_integrated_variance_mean_and_positivity():
    b = simulate_paths(0.04, 0.0, np.linspace(0, 1, 65), 100_000, 11, sigma_hat=0.5)
    iv = integrated_variance(b)
    assert np.all(iv > 0)
    se = iv.std(ddof=1) / np.sqrt(b.n_paths)
    assert abs(iv.mean() - 0.04) < 3 * se
    assert np.all(np.diff(b.integrals, axis=1) >= 0)


def test_integral_refinement_order_on_fixed_increments():
    # coarsen one fine simulation; trapezoid error on rough paths is rms O(ds)
    fine = simulate_paths(0.04, 0.0, np.linspace(0, 1, 513), 4000, 17, sigma_hat=0.5)
    i_fine = integrated_variance(fine)

    def coarse_integral(stride):
        vals = fine.values[:, ::stride]
        ds = np.diff(fine.times[::stride])
        return (0.5 * (vals[:, :-1] + vals[:, 1:]) * ds).sum(axis=1)

    err64 = np.sqrt(np.mean((coarse_integral(8) - i_fine) ** 2))
    err256 = np.sqrt(np.mean((coarse_integral(2) - i_fine) ** 2))
    order = np.log2(err64 / err256) / 2.0
    assert 0.7 < order < 1.4


def test_determinism_same_seed():
    a = simulate_paths(0.04, 0.0, GRID, 500, 123, sigma_hat=0.5)
    b = simulate_paths(0.04, 0.0, GRID, 500, 123, sigma_hat=0.5)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.integrals, b.integrals)
    c = simulate_paths(0.04, 0.0, GRID, 500, 123, sigma_hat=0.5, stream=1)
    assert not np.array_equal(a.values, c.values)


def test_exp_functional_lambda_zero_unit_g():
    b = simulate_paths(0.04, 0.0, GRID, 200, 1, sigma_hat=0.5)
    est = exp_functional(b, 0.0 + 0.0j, lambda v, s: np.ones_like(v))
    assert est.mean == pytest.approx(1.0, rel=1e-14)   # T - t exactly
    assert est.std_error == pytest.approx(0.0, abs=1e-15)


def test_exp_functional_constant_v_closed_form():
    b = simulate_paths(0.04, 0.0, GRID, 8, 1, sigma_hat=0.0)
    for lam in (-0.5 + 0.0j, -2.0 + 1.0j, -12.5 + 5.0j):
        est = exp_functional(b, lam, lambda v, s: np.ones_like(v))
        want = (1.0 - np.exp(lam * 0.04)) / (-lam * 0.04)
        # trapezoid-in-s bias only, O((ds)^2)
        assert abs(est.mean - want) < 5e-5 * abs(want)


def test_exp_functional_boundedness_and_instability_signal():
    b = simulate_paths(0.04, 0.0, GRID, 100, 3, sigma_hat=0.5)
    with pytest.raises(UnstableFunctionalError):
        exp_functional(b, 0.1 + 1.0j, lambda v, s: np.ones_like(v))
    # |exp(lam * I)| <= 1 for Re lam <= 0 because I >= 0
    lam = -3.0 + 2.0j
    assert np.all(np.abs(np.exp(lam * b.integrals)) <= 1.0 + 1e-15)


def test_exp_functional_se_scaling():
    lam = -2.0 + 1.0j
    g = lambda v, s: v
    se = {}
    for n in (2000, 8000):
        b = simulate_paths(0.04, 0.0, np.linspace(0, 1, 65), n, 5, sigma_hat=0.5)
        se[n] = exp_functional(b, lam, g).std_error
    ratio = se[2000] / se[8000]
    assert 1.6 < ratio < 2.4      # quadrupling paths halves the SE (+-20%)


def test_batch_invariant_enforcement():
    b = simulate_paths(0.04, 0.0, GRID, 10, 1, sigma_hat=0.5)
    bad = b.values.copy()
    bad[0, 3] = -1.0
    with pytest.raises(ValueError):
        VolPathBatch(times=b.times, values=bad, integrals=b.integrals,
                     sigma_hat=0.5, seed=1)
