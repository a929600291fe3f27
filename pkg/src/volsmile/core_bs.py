"""Black-Scholes kernel in discounted coordinates.

All prices here are discounted: the stock state is x = e^{-rt}S(t), the
strike is k = e^{-rT}K, and the remaining total variance is (T-t)*v with v
the current instantaneous variance.  In these coordinates the kernel has no
rate terms; undiscounting happens only at the CLI boundary.

Functions accept floats or numpy arrays and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr  # Phi via erfc, full double precision

from .errors import ConvergenceError, DegenerateInputError, NoSolutionError

__all__ = [
    "MarketParams", "OptionSpec", "Moneyness",
    "d_plus_minus", "bs_price", "bs_delta", "bs_vega_v", "bs_volga_v",
    "source_phi", "implied_vol", "discount_transforms", "payoff",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MarketParams:
    """Market constants: rate, initial stock price/variance, vol of vol.

    sigma_hat = 0 is admitted as the degenerate flat-volatility reference
    case (classic Black-Scholes); the variance drift a_hat must be zero.
    """
    r: float
    s0: float
    v0: float
    sigma_hat: float
    a_hat: float = 0.0

    def __post_init__(self):
        if not self.s0 > 0:
            raise ValueError(f"s0 must be > 0, got {self.s0}")
        if not self.v0 > 0:
            raise ValueError(f"v0 must be > 0, got {self.v0}")
        if self.r < 0:
            raise ValueError(f"r must be >= 0, got {self.r}")
        if self.sigma_hat < 0:
            raise ValueError(f"sigma_hat must be >= 0, got {self.sigma_hat}")
        if self.a_hat != 0.0:
            raise ValueError("a_hat must be 0 (driftless variance process)")


@dataclass(frozen=True)
class OptionSpec:
    """European option: strike K (undiscounted), expiry T, call or put."""
    strike: float
    expiry: float
    kind: str = "call"

    def __post_init__(self):
        if not self.strike > 0:
            raise ValueError(f"strike must be > 0, got {self.strike}")
        if not self.expiry > 0:
            raise ValueError(f"expiry must be > 0, got {self.expiry}")
        if self.kind not in ("call", "put"):
            raise ValueError(f"kind must be 'call' or 'put', got {self.kind!r}")

    def discounted_strike(self, r: float) -> float:
        return math.exp(-r * self.expiry) * self.strike


@dataclass(frozen=True)
class Moneyness:
    """Pricing state in discounted coordinates: x = e^{-rt}S(t)."""
    x: float
    v: float
    t: float

    def __post_init__(self):
        if not self.x > 0:
            raise ValueError(f"x must be > 0, got {self.x}")
        if not self.v > 0:
            raise ValueError(f"v must be > 0, got {self.v}")
        if self.t < 0:
            raise ValueError(f"t must be >= 0, got {self.t}")

    def z(self, k_tilde: float) -> float:
        """Log-moneyness log(x / k_tilde)."""
        return math.log(self.x / k_tilde)


def payoff(x, k_tilde, kind="call"):
    """Terminal claim in discounted units: (x-k)+ for calls, (k-x)+ for puts."""
    x = np.asarray(x, dtype=float)
    if kind == "call":
        return np.maximum(x - k_tilde, 0.0)
    return np.maximum(k_tilde - np.asarray(x, dtype=float), 0.0)


def d_plus_minus(x, v, tau, k_tilde):
    """d+- = log(x/k)/sqrt(tau*v) +- sqrt(tau*v)/2; requires tau > 0, v > 0."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0) or np.any(v <= 0):
        raise DegenerateInputError("d_plus_minus needs tau > 0 and v > 0; "
                                   "use the payoff limit at tau = 0 or v = 0")
    w = np.sqrt(tau * v)
    ratio = np.log(x / k_tilde) / w
    return ratio + w / 2.0, ratio - w / 2.0


def bs_price(x, v, tau, k_tilde, kind="call"):
    """Discounted Black-Scholes price with remaining variance tau*v.

    call = x Phi(d+) - k Phi(d-);  put = call - x + k (parity).
    tau = 0 or v = 0 return the payoff / deterministic limit.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    tau = np.asarray(tau, dtype=float)
    degenerate = (tau <= 0) | (v <= 0)
    if np.all(degenerate):
        return payoff(x, k_tilde, kind)
    vs = np.where(degenerate, 1.0, v)      # dummy values on the degenerate set
    ts = np.where(degenerate, 1.0, tau)
    dp, dm = d_plus_minus(x, vs, ts, k_tilde)
    call = x * ndtr(dp) - k_tilde * ndtr(dm)
    call = np.where(degenerate, payoff(x, k_tilde, "call"), call)
    if kind == "call":
        return call
    return call - x + k_tilde


def bs_delta(x, v, tau, k_tilde, kind="call"):
    """dH/dx: Phi(d+) for calls, Phi(d+) - 1 for puts."""
    dp, _ = d_plus_minus(x, v, tau, k_tilde)
    delta = ndtr(dp)
    return delta if kind == "call" else delta - 1.0


def _dv_brackets(x, v, tau, k_tilde):
    """dd+/dv and dd-/dv, the bracket terms of the variance sensitivities."""
    lg = np.log(np.asarray(x, dtype=float) / k_tilde)
    w = np.sqrt(tau * v)
    common = -lg / (2.0 * v * w)
    spread = np.sqrt(tau) / (4.0 * np.sqrt(v))
    return common + spread, common - spread


def bs_vega_v(x, v, tau, k_tilde):
    """dH/dv (same for call and put): x n(d+) dd+/dv - k n(d-) dd-/dv."""
    x = np.asarray(x, dtype=float)
    dp, dm = d_plus_minus(x, v, tau, k_tilde)
    A, B = _dv_brackets(x, v, tau, k_tilde)
    return (x * np.exp(-dp * dp / 2.0) * A
            - k_tilde * np.exp(-dm * dm / 2.0) * B) / _SQRT_2PI


def bs_volga_v(x, v, tau, k_tilde):
    """d2H/dv2 (call/put identical), by the chain rule:

        x n(d+) (A' - d+ A^2) - k n(d-) (B' - d- B^2),
        A = dd+/dv, B = dd-/dv.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    tau = np.asarray(tau, dtype=float)
    dp, dm = d_plus_minus(x, v, tau, k_tilde)
    A, B = _dv_brackets(x, v, tau, k_tilde)
    lg = np.log(x / k_tilde)
    w = np.sqrt(tau * v)
    curve = 1.5 * lg / (2.0 * v * v * w)
    bump = np.sqrt(tau) / (8.0 * v * np.sqrt(v))
    Ap = curve - bump
    Bp = curve + bump
    return (x * np.exp(-dp * dp / 2.0) * (Ap - dp * A * A)
            - k_tilde * np.exp(-dm * dm / 2.0) * (Bp - dm * B * B)) / _SQRT_2PI


def source_phi(x, v, tau, k_tilde, sigma_hat):
    """Source term 0.5 sigma_hat^2 v^2 d2H/dv2; 0 at tau = 0 (its limit)."""
    if sigma_hat == 0.0:
        return np.zeros_like(np.asarray(x, dtype=float) * np.asarray(v))
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    tau = np.asarray(tau, dtype=float)
    out = np.zeros(np.broadcast(x, v, tau).shape)
    live = tau > 0
    if np.any(live):
        xb, vb, tb = np.broadcast_arrays(x, v, tau)
        out[live] = (0.5 * sigma_hat**2 * vb[live]**2
                     * bs_volga_v(xb[live], vb[live], tb[live], k_tilde))
    if out.ndim == 0 or (np.isscalar(x) and np.isscalar(v) and np.isscalar(tau)):
        return float(out) if out.ndim == 0 else out
    return out


def implied_vol(price, x, tau, k_tilde, kind="call",
                tol=1e-10, max_iter=100, v_max=16.0):
    """Invert bs_price in the variance v (scalar).

    Safeguarded Newton (analytic dH/dv) with bisection fallback on
    [1e-12, v_max]; the at-money-style seed 8*2pi*price^2/(x^2 tau) is
    clamped into the bracket.  Raises NoSolutionError outside the static
    band, ConvergenceError (with the final bracket) on stagnation.
    """
    price = float(price)
    x = float(x)
    if tau <= 0:
        raise DegenerateInputError("implied_vol needs tau > 0")
    intrinsic = float(payoff(x, k_tilde, kind))
    upper = x if kind == "call" else k_tilde
    if price <= intrinsic or price >= upper:
        raise NoSolutionError(
            f"price {price} outside the static band ({intrinsic}, {upper})")
    lo, hi = 1e-12, v_max
    while bs_price(x, hi, tau, k_tilde, kind) < price:
        hi *= 4.0
        if hi > 1e6:
            raise NoSolutionError(f"no variance below 1e6 reaches price {price}")
    v = min(max(8.0 * 2.0 * math.pi * price**2 / (x * x * tau), lo), hi)
    for _ in range(max_iter):
        p = float(bs_price(x, v, tau, k_tilde, kind))
        diff = p - price
        if abs(diff) < tol:
            return v
        if diff > 0:
            hi = v
        else:
            lo = v
        slope = float(bs_vega_v(x, v, tau, k_tilde))
        step_ok = slope > 0
        if step_ok:
            v_new = v - diff / slope
            step_ok = lo < v_new < hi
        v = v_new if step_ok else 0.5 * (lo + hi)
    raise ConvergenceError(
        f"implied_vol stagnated; bracket [{lo}, {hi}], last price error {diff}")


def discount_transforms(s, p, t, r, strike, expiry):
    """(S, P, t) -> (S~, K~, P~) = (e^{-rt}S, e^{-rT}K, e^{-rt}P)."""
    disc_t = math.exp(-r * t)
    return disc_t * s, math.exp(-r * expiry) * strike, disc_t * p
