"""Discrete-time bond-stock-options market simulator.

Simulates the joint stock/variance dynamics (independent drivers, exact
lognormal steps, appreciation rate pinned to r so the discounted stock is a
martingale) and runs the two experiments the model is built around:

* under naive Black-Scholes pricing of two strikes, the delta/vega-neutral
  spread accrues a deterministic drift (an arbitrage) that vanishes for
  sigma_hat = 0 and cannot be constructed from a single strike;
* under the corrected pricing rule (Black-Scholes plus the table-backed
  smile correction), discounted option prices are spanned by the stock and
  one reference option, so the replication residual shrinks with the step.

All accounting is done in discounted units where the bond is constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_bs import bs_delta, bs_price, bs_vega_v, bs_volga_v
from .errors import InvalidGridError, OutOfGridError
from .pde_oracle import GridFunction

__all__ = ["MarketPath", "NaiveBSRule", "TableRule", "ArbitrageReport",
           "ReplicationReport", "simulate_market", "arbitrage_strategy_bs",
           "single_strike_strategy_bs", "replication_residual",
           "build_smile_rule_table"]


@dataclass(frozen=True)
class MarketPath:
    """Batch of simulated market paths; stock is undiscounted S(t)."""
    times: np.ndarray              # (M+1,)
    stock: np.ndarray              # (n_paths, M+1)
    variance: np.ndarray           # (n_paths, M+1)
    r: float
    sigma_hat: float
    seed: int

    @property
    def n_paths(self) -> int:
        return self.stock.shape[0]

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def bond(self) -> np.ndarray:
        return np.exp(self.r * self.times)

    @property
    def discounted_stock(self) -> np.ndarray:
        return self.stock * np.exp(-self.r * self.times)[None, :]


def simulate_market(params, horizon, n_steps, n_paths, seed) -> MarketPath:
    """Exact lognormal steps for S and v with independent drivers.

    The appreciation rate is r, so e^{-rt} S(t) is a martingale and hedging
    P&L statistics carry no drift nuisance.
    """
    if n_steps < 1 or horizon <= 0:
        raise InvalidGridError("need n_steps >= 1 and horizon > 0")
    times = np.linspace(0.0, horizon, n_steps + 1)
    dt = horizon / n_steps
    rng = np.random.Generator(np.random.Philox(key=seed))
    dw = rng.standard_normal((2, n_paths, n_steps)) * math.sqrt(dt)
    v = np.empty((n_paths, n_steps + 1))
    s = np.empty((n_paths, n_steps + 1))
    v[:, 0] = params.v0
    s[:, 0] = params.s0
    sh = params.sigma_hat
    for k in range(n_steps):
        vol = np.sqrt(v[:, k])
        s[:, k + 1] = s[:, k] * np.exp((params.r - 0.5 * v[:, k]) * dt
                                       + vol * dw[0, :, k])
        if sh == 0.0:
            v[:, k + 1] = v[:, k]
        else:
            v[:, k + 1] = v[:, k] * np.exp(sh * dw[1, :, k] - 0.5 * sh**2 * dt)
    return MarketPath(times=times, stock=s, variance=v, r=params.r,
                      sigma_hat=sh, seed=seed)


# ------------------------------------------------------------- pricing rules

def build_smile_rule_table(sigma_hat, expiry, *, z_max=6.0, nz=321, ny=129,
                           nt=128, y_min=math.log(1e-3), y_max=math.log(1.0)):
    """Dense (z, y, t) table of the pricing correction for unit strike.

    The corrected rule uses, on each side of the money, the solution of the
    full-line problem driven by that side's half of the source (what the
    Fourier construction computes); the two solves are stitched at z = 0.
    Avoids nested Monte Carlo inside path loops.
    """
    from .core_bs import source_phi as _phi

    if nz % 2 == 0:
        raise InvalidGridError("nz must be odd so z = 0 is a grid node")

    def one_sided(sign):
        def src(zc, vr, tau):
            phi = _phi(np.exp(zc), vr, tau, 1.0, sigma_hat)
            w = np.where(sign * zc > 0, 1.0, 0.0) \
                + np.where(zc == 0.0, 0.5, 0.0)
            return -w * phi

        from .pde_oracle import solve_bvp
        return solve_bvp(src, sigma_hat, expiry, side=None, z_max=z_max,
                         nz=nz, ny=ny, nt=nt, y_min=y_min, y_max=y_max,
                         store="all").grid

    right = one_sided(+1)
    left = one_sided(-1)
    i0 = nz // 2                        # z = 0 node
    values = np.concatenate([left.values[:i0], right.values[i0:]], axis=0)
    return GridFunction(z=right.z, y=right.y, t=right.t, values=values,
                        meta={"sigma_hat": sigma_hat, "expiry": expiry,
                              "kind": "stitched one-sided corrections"})

class NaiveBSRule:
    """P~(t, K) = H_BS(discounted stock, current variance); the rule the
    arbitrage construction exploits."""

    def __init__(self, expiry):
        self.expiry = float(expiry)

    def price(self, x, v, tau, k_tilde, kind):
        return bs_price(x, v, tau, k_tilde, kind)

    def delta(self, x, v, tau, k_tilde, kind):
        return bs_delta(x, v, tau, k_tilde, kind)

    def vega_v(self, x, v, tau, k_tilde, kind):
        return bs_vega_v(x, v, tau, k_tilde)

    def volga_v(self, x, v, tau, k_tilde, kind):
        return bs_volga_v(x, v, tau, k_tilde)


class TableRule:
    """H = H_BS + k * u(log(x/k), log v, t) with u from a precomputed grid.

    The correction and its sensitivities come from the table (central
    differences precomputed on the grid); the Black-Scholes part is closed
    form.  Interpolation outside the table raises OutOfGridError.
    """

    def __init__(self, u_grid: GridFunction, expiry):
        self.expiry = float(expiry)
        self.u = u_grid
        hz = u_grid.z[1] - u_grid.z[0]
        hy = u_grid.y[1] - u_grid.y[0]
        dz_vals = np.gradient(u_grid.values, hz, axis=0)
        dy_vals = np.gradient(u_grid.values, hy, axis=1)
        self.du_dz = GridFunction(u_grid.z, u_grid.y, u_grid.t, dz_vals)
        self.du_dy = GridFunction(u_grid.z, u_grid.y, u_grid.t, dy_vals)

    def _args(self, x, v, tau, k_tilde):
        z = np.log(np.asarray(x, dtype=float) / k_tilde)
        y = np.log(np.asarray(v, dtype=float))
        t = self.expiry - tau
        return z, y, np.broadcast_to(t, z.shape)

    def price(self, x, v, tau, k_tilde, kind):
        z, y, t = self._args(x, v, tau, k_tilde)
        return bs_price(x, v, tau, k_tilde, kind) + k_tilde * self.u.interp(z, y, t)

    def delta(self, x, v, tau, k_tilde, kind):
        z, y, t = self._args(x, v, tau, k_tilde)
        return bs_delta(x, v, tau, k_tilde, kind) \
            + k_tilde / np.asarray(x) * self.du_dz.interp(z, y, t)

    def vega_v(self, x, v, tau, k_tilde, kind):
        z, y, t = self._args(x, v, tau, k_tilde)
        return bs_vega_v(x, v, tau, k_tilde) \
            + k_tilde / np.asarray(v) * self.du_dy.interp(z, y, t)


# ------------------------------------------------------------- strategies

@dataclass
class ArbitrageReport:
    pnl: np.ndarray                # discounted terminal wealth per path
    mean: float
    std_error: float
    t_stat: float
    xi_mean: np.ndarray            # cross-path mean drift per step
    wealth_identity_max: float     # worst bookkeeping residual
    n_degenerate: int              # steps skipped for singular hedge systems
    label: str = ""


@dataclass
class ReplicationReport:
    accumulated: np.ndarray        # per-path sum of residual increments
    rms: float
    skip_fraction: float
    n_steps: int
    dt: float
    label: str = ""


def _wealth_identity(x_tilde, beta, gamma0, s_tilde, option_value):
    lhs = x_tilde
    rhs = beta + gamma0 * s_tilde + option_value
    scale = np.maximum(np.abs(lhs), 1.0)
    return float(np.max(np.abs(lhs - rhs) / scale))


def arbitrage_strategy_bs(path: MarketPath, k1, k2, expiry, kind="call",
                          eps_steps=2, cond_floor=1e-12):
    """Delta/vega-neutral two-strike spread under naive BS pricing.

    Per step: gamma_1 = 1, gamma_2 = -Vv(K1)/Vv(K2) zeroes the variance
    exposure, the stock position zeroes the price exposure, and the bond
    absorbs the rest.  The predicted drift is
    xi = (sh^2 v^2 / 2)(gamma_1 volga_1 + gamma_2 volga_2).
    """
    if k1 == k2:
        raise ValueError("need two distinct strikes")
    rule = NaiveBSRule(expiry)
    kt1 = math.exp(-path.r * expiry) * k1
    kt2 = math.exp(-path.r * expiry) * k2
    x = path.discounted_stock
    v = path.variance
    times = path.times
    n_end = path.n_steps - eps_steps
    n_paths = path.n_paths
    wealth = np.zeros(n_paths)
    xi_mean = np.zeros(n_end)
    ident = 0.0
    degenerate = 0
    for k in range(n_end):
        tau = expiry - times[k]
        xk, vk = x[:, k], v[:, k]
        p1 = rule.price(xk, vk, tau, kt1, kind)
        p2 = rule.price(xk, vk, tau, kt2, kind)
        vv1 = rule.vega_v(xk, vk, tau, kt1, kind)
        vv2 = rule.vega_v(xk, vk, tau, kt2, kind)
        bad = np.abs(vv2) < cond_floor
        degenerate += int(bad.sum())
        g2 = np.where(bad, 0.0, -vv1 / np.where(bad, 1.0, vv2))
        g1 = np.where(bad, 0.0, 1.0)
        g0 = -(g1 * rule.delta(xk, vk, tau, kt1, kind)
               + g2 * rule.delta(xk, vk, tau, kt2, kind))
        beta = wealth - g0 * xk - g1 * p1 - g2 * p2
        ident = max(ident, _wealth_identity(
            wealth, beta, g0, xk, g1 * p1 + g2 * p2))
        xi = 0.5 * path.sigma_hat**2 * vk**2 * (
            g1 * rule.volga_v(xk, vk, tau, kt1, kind)
            + g2 * rule.volga_v(xk, vk, tau, kt2, kind))
        xi_mean[k] = float(xi.mean())
        tau_next = expiry - times[k + 1]
        p1n = rule.price(x[:, k + 1], v[:, k + 1], tau_next, kt1, kind)
        p2n = rule.price(x[:, k + 1], v[:, k + 1], tau_next, kt2, kind)
        wealth = wealth + g0 * (x[:, k + 1] - xk) + g1 * (p1n - p1) \
            + g2 * (p2n - p2)
    mean = float(wealth.mean())
    se = float(wealth.std(ddof=1) / math.sqrt(n_paths))
    t = mean / se if se > 0 else 0.0
    return ArbitrageReport(pnl=wealth, mean=mean, std_error=se, t_stat=t,
                           xi_mean=xi_mean, wealth_identity_max=ident,
                           n_degenerate=degenerate,
                           label=f"two-strike {k1}/{k2} {kind}")


def single_strike_strategy_bs(path: MarketPath, k, expiry, eps_steps=2):
    """Vega-neutral single-strike mix (long call, short put), delta hedged.

    Call and put share the variance sensitivities, so the only vega-neutral
    combination is proportional to call - put = forward; hedging its price
    exposure leaves no extractable drift (parity makes the P&L vanish to
    rounding).
    """
    kt = math.exp(-path.r * expiry) * k
    x = path.discounted_stock
    v = path.variance
    times = path.times
    n_end = path.n_steps - eps_steps
    wealth = np.zeros(path.n_paths)
    ident = 0.0
    for kk in range(n_end):
        tau = expiry - times[kk]
        xk, vk = x[:, kk], v[:, kk]
        pc = bs_price(xk, vk, tau, kt, "call")
        pp = bs_price(xk, vk, tau, kt, "put")
        g0 = -(bs_delta(xk, vk, tau, kt, "call")
               - bs_delta(xk, vk, tau, kt, "put"))   # = -1 by parity
        beta = wealth - g0 * xk - pc + pp
        ident = max(ident, _wealth_identity(wealth, beta, g0, xk, pc - pp))
        tau_next = expiry - times[kk + 1]
        pcn = bs_price(x[:, kk + 1], v[:, kk + 1], tau_next, kt, "call")
        ppn = bs_price(x[:, kk + 1], v[:, kk + 1], tau_next, kt, "put")
        wealth = wealth + g0 * (x[:, kk + 1] - xk) + (pcn - pc) - (ppn - pp)
    mean = float(wealth.mean())
    scale = float(np.abs(kt))
    if np.max(np.abs(wealth)) < 1e-10 * scale:
        t = 0.0      # riskless-zero mix: no drift to extract
        se = 0.0
    else:
        se = float(wealth.std(ddof=1) / math.sqrt(path.n_paths))
        t = mean / se if se > 0 else 0.0
    return ArbitrageReport(pnl=wealth, mean=mean, std_error=se, t_stat=t,
                           xi_mean=np.zeros(n_end), wealth_identity_max=ident,
                           n_degenerate=0, label=f"single-strike {k}")


def replication_residual(path: MarketPath, rule, k1, k2, expiry, kind="call",
                         eps_steps=2, vega_floor=1e-3, max_skip=0.05):
    """Residual of spanning dP~(K2) by (dS~, dP~(K1)) under a pricing rule.

    r_k = dP~2 - Hx2 dS~ - (Hv2/Hv1)(dP~1 - Hx1 dS~); steps with |Hv1|
    below vega_floor are skipped and counted, and a skip fraction above
    max_skip raises.
    """
    kt1 = math.exp(-path.r * expiry) * k1
    kt2 = math.exp(-path.r * expiry) * k2
    x = path.discounted_stock
    v = path.variance
    times = path.times
    n_end = path.n_steps - eps_steps
    acc = np.zeros(path.n_paths)
    skipped = 0
    total = 0
    for k in range(n_end):
        tau = expiry - times[k]
        tau_n = expiry - times[k + 1]
        xk, vk = x[:, k], v[:, k]
        hv1 = np.asarray(rule.vega_v(xk, vk, tau, kt1, kind))
        ok = np.abs(hv1) >= vega_floor
        skipped += int((~ok).sum())
        total += ok.size
        dS = x[:, k + 1] - xk
        dP1 = np.asarray(rule.price(x[:, k + 1], v[:, k + 1], tau_n, kt1, kind)
                         ) - np.asarray(rule.price(xk, vk, tau, kt1, kind))
        dP2 = np.asarray(rule.price(x[:, k + 1], v[:, k + 1], tau_n, kt2, kind)
                         ) - np.asarray(rule.price(xk, vk, tau, kt2, kind))
        hx1 = np.asarray(rule.delta(xk, vk, tau, kt1, kind))
        hx2 = np.asarray(rule.delta(xk, vk, tau, kt2, kind))
        hv2 = np.asarray(rule.vega_v(xk, vk, tau, kt2, kind))
        ratio = np.where(ok, hv2 / np.where(ok, hv1, 1.0), 0.0)
        r = dP2 - hx2 * dS - ratio * (dP1 - hx1 * dS)
        acc += np.where(ok, r, 0.0)
    frac = skipped / max(total, 1)
    if frac > max_skip:
        raise ValueError(f"skip fraction {frac:.3f} exceeds {max_skip}")
    rms = float(np.sqrt(np.mean(acc**2)))
    return ReplicationReport(accumulated=acc, rms=rms, skip_fraction=frac,
                             n_steps=n_end, dt=float(times[1] - times[0]),
                             label=getattr(rule, "label", type(rule).__name__))
