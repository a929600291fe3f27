"""Black-Scholes kernel tests.

The pricing oracle is an independent quadrature of the lognormal payoff:
    call(x, v, tau, k) = E (x exp(sqrt(v tau) xi - v tau / 2) - k)+,
xi standard normal, integrated with scipy.integrate.quad from the payoff
kink upward.  Sensitivities are checked against central differences.
"""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from volsmile.core_bs import (MarketParams, Moneyness, OptionSpec, bs_delta,
                              bs_price, bs_vega_v, bs_volga_v, d_plus_minus,
                              discount_transforms, implied_vol, payoff,
                              source_phi)
from volsmile.errors import (ConvergenceError, DegenerateInputError,
                             NoSolutionError)


def call_quadrature_oracle(x, v, tau, k):
    """Lognormal payoff expectation by adaptive quadrature (no Phi used)."""
    w = math.sqrt(v * tau)
    xi0 = (math.log(k / x) + v * tau / 2.0) / w

    def integrand(xi):
        return ((x * math.exp(w * xi - v * tau / 2.0) - k)
                * math.exp(-xi * xi / 2.0) / math.sqrt(2.0 * math.pi))

    val, err = quad(integrand, xi0, xi0 + 40.0, limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


# ---------------------------------------------------------------- d_plus_minus

def test_d_at_money_symmetry():
    dp, dm = d_plus_minus(100.0, 0.04, 1.0, 100.0)
    assert dp == pytest.approx(0.1, abs=1e-15)
    assert dm == pytest.approx(-0.1, abs=1e-15)


def test_d_log_ratio_one():
    dp, dm = d_plus_minus(100.0 * math.e, 1.0, 1.0, 100.0)
    assert dp == pytest.approx(1.5, rel=1e-14)
    assert dm == pytest.approx(0.5, rel=1e-14)


def test_d_difference_identity():
    dp, dm = d_plus_minus(110.0, 0.04, 0.25, 100.0)
    assert dp - dm == pytest.approx(0.1, rel=1e-13)
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = rng.uniform(20, 300)
        v = rng.uniform(1e-3, 2.0)
        tau = rng.uniform(1e-3, 3.0)
        dp, dm = d_plus_minus(x, v, tau, 100.0)
        assert dp - dm == pytest.approx(math.sqrt(tau * v), rel=1e-12)


def test_d_degenerate_signals():
    with pytest.raises(DegenerateInputError):
        d_plus_minus(100.0, 0.04, 0.0, 100.0)
    with pytest.raises(DegenerateInputError):
        d_plus_minus(100.0, 0.0, 1.0, 100.0)


# ---------------------------------------------------------------- bs_price

def test_price_at_money_vs_quadrature():
    # frozen oracle value for x = k = 100, v = 0.04, tau = 1
    oracle = call_quadrature_oracle(100.0, 0.04, 1.0, 100.0)
    assert oracle == pytest.approx(7.965567455405804, abs=1e-9)
    assert bs_price(100.0, 0.04, 1.0, 100.0, "call") == pytest.approx(oracle, abs=1e-10)


def test_price_random_sweep_vs_quadrature():
    rng = np.random.default_rng(11)
    for _ in range(60):
        x = rng.uniform(30, 250)
        k = rng.uniform(50, 150)
        v = rng.uniform(5e-3, 1.5)
        tau = rng.uniform(0.05, 2.5)
        got = float(bs_price(x, v, tau, k, "call"))
        want = call_quadrature_oracle(x, v, tau, k)
        assert got == pytest.approx(want, abs=1e-8 * (x + k))


def test_price_terminal_and_deterministic_limits():
    assert bs_price(120.0, 0.04, 0.0, 100.0, "call") == 20.0
    assert bs_price(120.0, 0.04, 0.0, 100.0, "put") == 0.0
    assert bs_price(80.0, 1e-14, 1.0, 100.0, "call") == pytest.approx(0.0, abs=1e-12)
    assert bs_price(80.0, 1e-14, 1.0, 100.0, "put") == pytest.approx(20.0, abs=1e-9)


def test_put_call_parity():
    rng = np.random.default_rng(3)
    x = rng.uniform(40, 220, size=200)
    v = rng.uniform(1e-3, 1.2, size=200)
    tau = rng.uniform(0.01, 2.0, size=200)
    c = bs_price(x, v, tau, 100.0, "call")
    p = bs_price(x, v, tau, 100.0, "put")
    np.testing.assert_allclose(c - p, x - 100.0, rtol=1e-12, atol=1e-12)


def test_price_bounds_and_monotonicity():
    x = np.linspace(40, 200, 50)
    c1 = bs_price(x, 0.04, 1.0, 100.0, "call")
    c2 = bs_price(x, 0.09, 1.0, 100.0, "call")
    p1 = bs_price(x, 0.04, 1.0, 100.0, "put")
    p2 = bs_price(x, 0.09, 1.0, 100.0, "put")
    assert np.all(c1 >= 0) and np.all(c1 <= x)
    assert np.all(p1 >= 0) and np.all(p1 <= 100.0)
    assert np.all(c2 > c1) and np.all(p2 > p1)       # increasing in v
    assert np.all(np.diff(c1) > 0)                   # calls increasing in x


# ---------------------------------------------------------------- sensitivities

def test_vega_v_vs_central_difference():
    rng = np.random.default_rng(5)
    h = 1e-5
    for _ in range(40):
        x = rng.uniform(50, 180)
        v = rng.uniform(0.01, 1.0)
        tau = rng.uniform(0.05, 2.0)
        # 4th-order central difference keeps the truncation bias below the
        # 1e-6 relative target even at small v where d3H/dv3 is large; the
        # abs floor covers deep-tail points where the double-precision FD
        # saturates at roundoff (~eps * price / h)
        fd = (-bs_price(x, v + 2 * h, tau, 100.0) + 8 * bs_price(x, v + h, tau, 100.0)
              - 8 * bs_price(x, v - h, tau, 100.0) + bs_price(x, v - 2 * h, tau, 100.0)) / (12 * h)
        assert float(bs_vega_v(x, v, tau, 100.0)) == pytest.approx(
            fd, rel=1e-6, abs=4e-9)


def test_vega_v_call_put_identical_and_terminal_limit():
    a = bs_vega_v(93.0, 0.09, 0.5, 100.0)
    fd_call = (bs_price(93.0, 0.09 + 1e-6, 0.5, 100.0, "call")
               - bs_price(93.0, 0.09 - 1e-6, 0.5, 100.0, "call")) / 2e-6
    fd_put = (bs_price(93.0, 0.09 + 1e-6, 0.5, 100.0, "put")
              - bs_price(93.0, 0.09 - 1e-6, 0.5, 100.0, "put")) / 2e-6
    assert fd_call == pytest.approx(fd_put, rel=1e-9)
    assert float(a) == pytest.approx(fd_call, rel=1e-7)
    assert float(bs_vega_v(100.0, 0.04, 1e-16, 100.0)) == pytest.approx(0.0, abs=1e-5)


def test_volga_v_at_money_frozen_value():
    # second central difference of bs_price in v at x = k = 100, v = 0.04, tau = 1
    h = 1e-4
    fd = (bs_price(100.0, 0.04 + h, 1.0, 100.0) - 2 * bs_price(100.0, 0.04, 1.0, 100.0)
          + bs_price(100.0, 0.04 - h, 1.0, 100.0)) / h**2
    assert fd == pytest.approx(-1252.8814, rel=2e-5)
    got = float(bs_volga_v(100.0, 0.04, 1.0, 100.0))
    assert got == pytest.approx(fd, rel=1e-4)
    # closed at-money reduction: -k e^{-tau v/8} sqrt(tau) (1 + tau v/4) / (4 sqrt(2pi) v^{3/2})
    closed = (-100.0 * math.exp(-0.04 / 8) * (1 + 0.01)
              / (4 * math.sqrt(2 * math.pi) * 0.04**1.5))
    assert got == pytest.approx(closed, rel=1e-12)


def test_source_phi_vs_second_difference_grid():
    # oracle: second central difference of the BS price in v, evaluated in
    # 40-digit arithmetic so the comparison is truncation-limited, not
    # roundoff-limited (double-precision FD saturates at ~1e-3 relative in
    # the Gaussian tails).  A 2x2x2 corner subgrid here; the full 20x20x10
    # grid runs in the acceptance suite.
    from tests.fd_oracles import volga_fd_mp

    k, sh = 100.0, 0.5
    worst = 0.0
    for tau in (1.0, 0.3):
        for v in (0.01, 0.7):
            for z in (-1.5, 0.0, 0.8):
                x = k * math.exp(z)
                ref = 0.5 * sh**2 * v**2 * volga_fd_mp(x, v, tau, k)
                got = float(source_phi(x, v, tau, k, sh))
                worst = max(worst, abs(got - ref) / max(abs(ref), 1e-12 * k))
    assert worst < 1e-4


def test_source_phi_sigma_zero_and_terminal():
    assert np.all(source_phi(np.array([80.0, 100.0]), 0.04, 1.0, 100.0, 0.0) == 0)
    assert source_phi(100.0, 0.04, 0.0, 100.0, 0.5) == 0.0


def test_source_phi_gaussian_tail():
    k = 100.0
    for z in (-5.0, 5.0):
        val = source_phi(k * math.exp(z), 0.04, 1.0, k, 0.5)
        assert abs(float(val)) < 1e-8 * k


def test_source_phi_kind_independent():
    # d2/dv2 of call and put agree, so phi needs no kind argument
    h = 1e-5
    for x in (70.0, 100.0, 140.0):
        fd_c = (bs_price(x, 0.04 + h, 1.0, 100.0, "call")
                - 2 * bs_price(x, 0.04, 1.0, 100.0, "call")
                + bs_price(x, 0.04 - h, 1.0, 100.0, "call")) / h**2
        fd_p = (bs_price(x, 0.04 + h, 1.0, 100.0, "put")
                - 2 * bs_price(x, 0.04, 1.0, 100.0, "put")
                + bs_price(x, 0.04 - h, 1.0, 100.0, "put")) / h**2
        assert fd_c == pytest.approx(fd_p, abs=1e-4 * abs(fd_c) + 1e-8)


def test_bs_pde_residual_second_order():
    # dH/dt + (1/2) x^2 v d2H/dx2 = 0 in discounted coordinates
    k, v = 100.0, 0.09

    def residual(h):
        xs = np.linspace(60, 160, 41)
        res = []
        for x in xs:
            ht = (bs_price(x, v, 0.5 - h, k) - bs_price(x, v, 0.5 + h, k)) / (2 * h)
            hxx = (bs_price(x + h, v, 0.5, k) - 2 * bs_price(x, v, 0.5, k)
                   + bs_price(x - h, v, 0.5, k)) / h**2
            res.append(ht + 0.5 * x * x * v * hxx)
        return np.max(np.abs(res))

    r1, r2 = residual(0.2), residual(0.1)
    assert r2 < r1 / 3.0          # ~ O(h^2)


# ---------------------------------------------------------------- implied vol

def test_implied_vol_round_trip():
    p = float(bs_price(100.0, 0.04, 1.0, 100.0))
    assert implied_vol(p, 100.0, 1.0, 100.0) == pytest.approx(0.04, abs=1e-9)
    assert implied_vol(7.965567455405804, 100.0, 1.0, 100.0) == pytest.approx(0.04, abs=1e-6)
    rng = np.random.default_rng(23)
    for _ in range(60):
        x = rng.uniform(60, 160)
        v = rng.uniform(1e-4, 4.0)
        tau = rng.uniform(0.05, 2.0)
        kind = "call" if rng.random() < 0.5 else "put"
        p = float(bs_price(x, v, tau, 100.0, kind))
        lo = float(payoff(x, 100.0, kind))
        if p - lo < 1e-12:
            continue
        assert implied_vol(p, x, tau, 100.0, kind) == pytest.approx(v, abs=1e-8, rel=1e-7)


def test_implied_vol_monotone_limit():
    for eps in (1e-3, 1e-5, 1e-7):
        v = implied_vol(20.0 + eps, 120.0, 1.0, 100.0, "call")
        assert v < implied_vol(20.0 + 10 * eps, 120.0, 1.0, 100.0, "call") + 1e-12
    assert implied_vol(20.0 + 1e-9, 120.0, 1.0, 100.0) < 1e-3


def test_implied_vol_band_errors():
    with pytest.raises(NoSolutionError):
        implied_vol(20.0, 120.0, 1.0, 100.0, "call")      # intrinsic
    with pytest.raises(NoSolutionError):
        implied_vol(120.0, 120.0, 1.0, 100.0, "call")     # >= x
    with pytest.raises(NoSolutionError):
        implied_vol(100.0, 120.0, 1.0, 100.0, "put")      # >= k


# ---------------------------------------------------------------- transforms

def test_discount_transforms():
    s, k, p = discount_transforms(100.0, 7.0, 0.0, 0.0, 100.0, 1.0)
    assert (s, k, p) == (100.0, 100.0, 7.0)
    s, k, p = discount_transforms(100.0, 7.0, 1.0, 0.05, 100.0, 2.0)
    assert s == pytest.approx(100.0 * math.exp(-0.05))
    assert k == pytest.approx(100.0 * math.exp(-0.10))
    assert p == pytest.approx(7.0 * math.exp(-0.05))


def test_at_money_condition_equivalence():
    # e^{r(T-t)} S(t) = K  <=>  discounted S equals discounted K
    rng = np.random.default_rng(2)
    for _ in range(30):
        r = rng.uniform(0, 0.1)
        t = rng.uniform(0, 1)
        T = t + rng.uniform(0.1, 2)
        K = rng.uniform(50, 150)
        s = K * math.exp(-r * (T - t))
        s_t, k_t, _ = discount_transforms(s, 0.0, t, r, K, T)
        assert s_t == pytest.approx(k_t, rel=1e-14)


def test_domain_type_validation():
    with pytest.raises(ValueError):
        MarketParams(r=0.0, s0=-1.0, v0=0.04, sigma_hat=0.5)
    with pytest.raises(ValueError):
        MarketParams(r=0.0, s0=100.0, v0=0.04, sigma_hat=0.5, a_hat=0.1)
    MarketParams(r=0.0, s0=100.0, v0=0.04, sigma_hat=0.0)   # degenerate case allowed
    with pytest.raises(ValueError):
        OptionSpec(strike=0.0, expiry=1.0)
    with pytest.raises(ValueError):
        OptionSpec(strike=100.0, expiry=1.0, kind="straddle")
    assert OptionSpec(100.0, 1.0).discounted_strike(0.05) == pytest.approx(
        100.0 * math.exp(-0.05))
    m = Moneyness(x=110.0, v=0.04, t=0.5)
    assert m.z(100.0) == pytest.approx(math.log(1.1))
