"""Acceptance-grade consistency checks.

Each check implements one verification criterion at its stated tolerance and
returns a CheckResult; the CLI `check` command and the acceptance test
module both run these.  Tolerances are module constants, not parameters:
scale knobs (paths, grids) may be reduced for smoke runs, but the pass/fail
bars never move.

Two checks probe the at-the-money boundary claims of the correction
construction (boundary_matching, oracle_equivalence near z = 0) and one the
at-money smile anchor for large v0 (smile_anchor).  These measure a genuine
property gap of the construction; see the README's accuracy notes.  They are
reported honestly rather than forced.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core_bs import (MarketParams, bs_price, bs_vega_v, implied_vol, payoff,
                      source_phi)
from .market_sim import (NaiveBSRule, TableRule, arbitrage_strategy_bs,
                         build_smile_rule_table, replication_residual,
                         simulate_market, single_strike_strategy_bs)
from .pde_oracle import GridFunction, residual, solve_bvp, solve_parabU
from .smile_engine import (NumericsConfig, SmileEngine, forward_transform_many)
from .vol_process import exp_functional, simulate_paths

__all__ = ["CheckResult", "run_checks", "CHECKS"]

# pass/fail bars (fixed)
TOL_BS_KERNEL = 1e-8                 # * (x + k)
TOL_SOURCE_REL = 1e-4
MIN_RESIDUAL_ORDER = 1.8
TOL_PARABU_REL = 1e-3
TOL_BOUNDARY_VALUE_REL = 5e-3        # * max_z |u|, or 5 * SE
TOL_BOUNDARY_SLOPE_REL = 5e-2        # * max_z |du/dz|, or 5 * SE / h_z
TOL_ORACLE_EQ_REL = 1e-2             # * max |G|, plus 3 * SE
TOL_ANCHOR_ABS = 1e-3                # implied-variance deviation, or 3 * SE
T_STAT_ARBITRAGE = 5.0
T_STAT_CONTROL = 3.0
REPLICATION_RATIO_BAND = (1.1, 1.8)
NAIVE_FLOOR_RATIO = 1.1


@dataclass
class CheckResult:
    name: str
    passed: bool
    runtime: float
    details: dict = field(default_factory=dict)

    def summary_line(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        return f"{state} {self.name} ({self.runtime:.1f}s)"


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        result = fn(*a, **kw)
        result.runtime = time.perf_counter() - t0
        return result
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------- criterion 1

@_timed
def check_bs_kernel(n_random=200, seed=2024):
    """bs_price vs independent lognormal-payoff quadrature."""
    from scipy.integrate import quad

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_random):
        x = rng.uniform(30.0, 250.0)
        k = rng.uniform(50.0, 150.0)
        v = rng.uniform(5e-3, 1.5)
        tau = rng.uniform(0.05, 2.5)
        w = math.sqrt(v * tau)
        xi0 = (math.log(k / x) + v * tau / 2.0) / w

        def integrand(xi):
            return ((x * math.exp(w * xi - v * tau / 2.0) - k)
                    * math.exp(-xi * xi / 2.0) / math.sqrt(2.0 * math.pi))

        want, _ = quad(integrand, xi0, xi0 + 40.0, limit=200,
                       epsabs=1e-13, epsrel=1e-12)
        got = float(bs_price(x, v, tau, k, "call"))
        worst = max(worst, abs(got - want) / (x + k))
    return CheckResult("bs-kernel", worst < TOL_BS_KERNEL, 0.0,
                       {"max_scaled_error": worst, "tolerance": TOL_BS_KERNEL,
                        "n_random": n_random})


# ---------------------------------------------------------------- criterion 2

@_timed
def check_source_term(nz=20, nv=20, nt=10, sigma_hat=0.5):
    """source_phi vs 0.5 sh^2 v^2 * second central difference of bs_price.

    The difference quotient is evaluated in 40-digit arithmetic (step 1e-5)
    so the comparison is truncation-limited; the tiny absolute floor covers
    exact zero neighborhoods of the source.
    """
    import mpmath as mp

    mp.mp.dps = 40
    h = mp.mpf("1e-5")

    def phi_mp(t):
        return mp.erfc(-t / mp.sqrt(2)) / 2

    def call_mp(x, v, tau, k):
        w = mp.sqrt(tau * v)
        dp = mp.log(x / k) / w + w / 2
        return x * phi_mp(dp) - k * phi_mp(dp - w)

    k = 100.0
    worst = 0.0
    for tau in 1.0 - np.linspace(0.0, 0.9, nt):
        for v in np.linspace(0.01, 1.0, nv):
            for z in np.linspace(-2.0, 2.0, nz):
                x = k * math.exp(z)
                fd = (call_mp(mp.mpf(x), mp.mpf(v) + h, mp.mpf(tau), mp.mpf(k))
                      - 2 * call_mp(mp.mpf(x), mp.mpf(v), mp.mpf(tau), mp.mpf(k))
                      + call_mp(mp.mpf(x), mp.mpf(v) - h, mp.mpf(tau), mp.mpf(k)))
                ref = 0.5 * sigma_hat**2 * v**2 * float(fd / h**2)
                got = float(source_phi(x, v, tau, k, sigma_hat))
                worst = max(worst, abs(got - ref) / max(abs(ref), 1e-12 * k))
    return CheckResult("source-term", worst < TOL_SOURCE_REL, 0.0,
                       {"max_rel_error": worst, "tolerance": TOL_SOURCE_REL,
                        "grid": [nz, nv, nt]})


# ---------------------------------------------------------------- criterion 3

def _hbs_cube(n_space, n_time, expiry=1.0, t_hi=0.75):
    z = np.linspace(-2.0, 2.0, n_space)
    y = np.linspace(math.log(0.02), math.log(0.5), n_space)
    t = np.linspace(0.0, t_hi, n_time)
    vals = np.empty((n_space, n_space, n_time))
    for n, tn in enumerate(t):
        vals[:, :, n] = bs_price(np.exp(z)[:, None], np.exp(y)[None, :],
                                 expiry - tn, 1.0)
    return GridFunction(z=z, y=y, t=t, values=vals, meta={"expiry": expiry})


@_timed
def check_bs_residual_order(levels=((31, 11), (61, 21), (121, 41), (241, 81)),
                            sigma_hat=0.5):
    """Full-operator residual of H_BS against the source vanishes at O(h^2)."""
    def src(zc, vr, tau):
        return source_phi(np.exp(zc), vr, tau, 1.0, sigma_hat)

    norms = []
    for n_space, n_time in levels:
        rep = residual(_hbs_cube(n_space, n_time), src, sigma_hat)
        norms.append(rep.interior_l2)
    orders = [math.log2(norms[i] / norms[i + 1]) for i in range(len(norms) - 1)]
    return CheckResult("bs-residual-order", min(orders) >= MIN_RESIDUAL_ORDER,
                       0.0, {"l2_norms": norms, "orders": orders,
                             "min_order_required": MIN_RESIDUAL_ORDER})


# ---------------------------------------------------------------- criterion 4

@_timed
def check_parabU_vs_mc(omegas=(0.0, 1.0, 5.0, 20.0), v0=0.04, sigma_hat=0.5,
                       expiry=1.0, n_paths=100_000, m_steps=256, seed=4242,
                       ny=513, nt=512, side=2):
    """Monte-Carlo representation against the per-frequency CN solve.

    The MC side is -E int exp(lam I) F ds (the Feynman-Kac twin of the
    backward problem with source +F); both sides evaluate the same F.
    """
    batch = simulate_paths(v0, 0.0, np.linspace(0.0, expiry, m_steps + 1),
                           n_paths, seed, sigma_hat)
    y_fine = np.linspace(math.log(batch.values.min()) - 1e-6,
                         math.log(batch.values.max()) + 1e-6, 801)
    v_fine = np.exp(y_fine)
    rows = []
    ok = True
    for w in omegas:
        F_slices = {}

        def g(v, s, w=w, F_slices=F_slices):
            tau = expiry - s
            key = round(float(s), 12)
            if key not in F_slices:
                F_slices[key] = forward_transform_many(
                    side, np.array([w]), v_fine, tau, sigma_hat)[:, 0]
            Fv = F_slices[key]
            lv = np.log(v)
            return (np.interp(lv, y_fine, Fv.real)
                    + 1j * np.interp(lv, y_fine, Fv.imag))

        lam = -(w**2 + 1j * w) / 2.0
        est = exp_functional(batch, lam, g)
        mc = -est.mean

        def F_pde(v, tau, w=w):
            return forward_transform_many(side, np.array([w]), v, tau,
                                          sigma_hat)[:, 0]

        r = solve_parabU(w, F_pde, sigma_hat, expiry, ny=ny, nt=nt)
        jv = np.interp(math.log(v0), r.y, np.arange(r.y.size))
        j0 = int(jv)
        pde = r.values[j0, 0] * (1 - (jv - j0)) + r.values[j0 + 1, 0] * (jv - j0)
        err = abs(mc - pde)
        tol = 3 * est.std_error + TOL_PARABU_REL * abs(pde)
        ok &= err < tol
        rows.append({"omega": w, "mc": [mc.real, mc.imag],
                     "pde": [pde.real, pde.imag], "abs_error": err,
                     "tolerance": tol, "mc_se": est.std_error})
    return CheckResult("parabU-vs-mc", ok, 0.0,
                       {"rows": rows, "n_paths": n_paths})


# ---------------------------------------------------------------- criterion 5

def _engine(v0, sigma_hat, expiry, numerics):
    params = MarketParams(r=0.0, s0=100.0, v0=v0, sigma_hat=sigma_hat)
    return SmileEngine(params, expiry, numerics)


def default_check_numerics(seed=7011, **kw):
    base = dict(omega_max=40.0, d_omega=0.05, n_paths=20_000, m_steps=256,
                outer_stride=4, n_blocks=20, n_y=97, seed=seed)
    base.update(kw)
    return NumericsConfig(**base)


@_timed
def check_boundary_matching(v_list=(0.01, 0.04, 0.25), t_list=(0.0, 0.5),
                            sigma_hat=0.5, expiry=1.0, numerics=None):
    """|u(0+-)| and |du/dz(0+-)| of the reconstruction at the money.

    Probes the construction's claimed double boundary condition; the
    measured values quantify how strongly it is violated.
    """
    numerics = numerics or default_check_numerics()
    h_z = 0.05
    z_scan = np.arange(h_z, 2.0 + h_z / 2, h_z)
    rows = []
    ok = True
    for v0 in v_list:
        eng = _engine(v0, sigma_hat, expiry, numerics)
        for t in t_list:
            curve = eng.correction_curve(v0, t, np.concatenate([-z_scan[::-1],
                                                                z_scan]))
            u_max = float(np.max(np.abs(curve.u)))
            du_max = float(np.max(np.abs(np.diff(curve.u))) / h_z)
            for side in (1, 2):
                u0, u0_se = curve.u0[side]
                d0, d0_se = curve.du0[side]
                tol_u = max(5 * u0_se, TOL_BOUNDARY_VALUE_REL * u_max)
                tol_d = max(5 * d0_se / h_z, TOL_BOUNDARY_SLOPE_REL * du_max)
                pass_u = abs(u0) < tol_u
                pass_d = abs(d0) < tol_d
                ok &= pass_u and pass_d
                rows.append({"v0": v0, "t": t, "side": side,
                             "u0": u0, "u0_tol": tol_u, "u0_pass": pass_u,
                             "du0": d0, "du0_tol": tol_d, "du0_pass": pass_d,
                             "u_max": u_max, "du_max": du_max})
    return CheckResult("boundary-matching", ok, 0.0, {"rows": rows})


# ---------------------------------------------------------------- criterion 6

@_timed
def check_oracle_equivalence(v_list=(0.02, 0.04, 0.1, 0.25, 0.5),
                             sigma_hat=0.5, expiry=1.0, numerics=None,
                             fd_nz=257, fd_ny=257, fd_nt=512, z_lattice=0.1):
    """Reconstruction vs the half-line Dirichlet FD solve on |z| <= 2, t = 0."""
    numerics = numerics or default_check_numerics()

    def src(zc, vr, tau):
        return -source_phi(np.exp(zc), vr, tau, 1.0, sigma_hat)

    fd = {m: solve_bvp(src, sigma_hat, expiry, side=m, z_max=6.0, nz=fd_nz,
                       ny=fd_ny, nt=fd_nt) for m in (1, 2)}
    zq = np.arange(z_lattice, 2.0 + z_lattice / 2, z_lattice)
    rows = []
    n_fail = 0
    n_total = 0
    g_max = 0.0
    data = []
    for v0 in v_list:
        eng = _engine(v0, sigma_hat, expiry, numerics)
        for m, sign in ((1, -1.0), (2, 1.0)):
            z_pts = np.concatenate([[0.0], sign * zq]) if m == 2 else sign * zq
            curve = eng.correction_curve(v0, 0.0, z_pts)
            grid = fd[m].grid
            jv = np.interp(math.log(v0), grid.y, np.arange(grid.y.size))
            j0 = int(jv)
            line = grid.values[:, j0, 0] * (1 - (jv - j0)) \
                + grid.values[:, j0 + 1, 0] * (jv - j0)
            g_vals = np.interp(z_pts, grid.z, line)
            g_max = max(g_max, float(np.max(np.abs(g_vals))))
            data.append((v0, m, z_pts, curve.u, curve.std_error, g_vals))
    for v0, m, z_pts, u, se, g_vals in data:
        tol = 3 * se + TOL_ORACLE_EQ_REL * g_max
        bad = np.abs(u - g_vals) >= tol
        n_fail += int(bad.sum())
        n_total += bad.size
        if bad.any():
            worst = int(np.argmax(np.abs(u - g_vals) - tol))
            rows.append({"v0": v0, "side": m, "worst_z": float(z_pts[worst]),
                         "u": float(u[worst]), "g": float(g_vals[worst]),
                         "tol": float(tol[worst]),
                         "n_fail_points": int(bad.sum()),
                         "fail_z_range": [float(np.abs(z_pts[bad]).min()),
                                          float(np.abs(z_pts[bad]).max())]})
    return CheckResult("oracle-equivalence", n_fail == 0, 0.0,
                       {"n_fail": n_fail, "n_points": n_total,
                        "max_abs_G": g_max, "failures": rows})


# ---------------------------------------------------------------- criterion 7

@_timed
def check_trivial_limits(expiry=1.0):
    """Terminal correction is exactly zero; sigma_hat = 0 collapses to BS."""
    from .core_bs import OptionSpec

    ok = True
    details = {}
    numerics = NumericsConfig(n_paths=1000, m_steps=32, outer_stride=1,
                              n_blocks=10, seed=99, d_omega=0.5, omega_max=10.0)
    eng = _engine(0.04, 0.5, expiry, numerics)
    curve_T = eng.correction_curve(0.04, expiry, np.linspace(-2, 2, 9))
    ok &= bool(np.all(curve_T.u == 0.0))
    details["terminal_u_max"] = float(np.max(np.abs(curve_T.u)))
    res = eng.price(OptionSpec(110.0, expiry, "call"), 125.0, 0.04, expiry)
    ok &= res.price == float(payoff(125.0, 110.0, "call")) and res.u == 0.0
    eng0 = _engine(0.09, 0.0, expiry, NumericsConfig(seed=None))
    sm = eng0.smile(np.linspace(70, 140, 11), 100.0, 0.09, 0.0)
    flat = float(np.max(np.abs(sm.implied_vols - 0.09)))
    ok &= bool(np.all(sm.u == 0.0)) and flat < 1e-9
    details["sigma0_max_vol_dev"] = flat
    return CheckResult("trivial-limits", ok, 0.0, details)


# ---------------------------------------------------------------- criterion 8

@_timed
def check_smile_anchor(v0_list=(0.01, 0.04, 0.25), sigma_hat=0.5, expiry=1.0,
                       numerics=None):
    """Implied variance at the at-money strike vs the running variance."""
    numerics = numerics or default_check_numerics()
    rows = []
    ok = True
    for v0 in v0_list:
        eng = _engine(v0, sigma_hat, expiry, numerics)
        sols = eng._state(v0, 0.0)
        from .smile_engine import inverse_transform

        u0, u0_se, _ = inverse_transform(sols[2], np.array([0.0]))
        k_t = 100.0
        price_atm = float(bs_price(100.0, v0, expiry, k_t)) + k_t * float(u0[0])
        v_imp = implied_vol(price_atm, 100.0, expiry, k_t, "call")
        vega = float(bs_vega_v(100.0, v0, expiry, k_t))
        se_prop = k_t * float(u0_se[0]) / vega
        tol = max(3 * se_prop, TOL_ANCHOR_ABS)
        dev = abs(v_imp - v0)
        ok &= dev < tol
        rows.append({"v0": v0, "implied": v_imp, "deviation": dev,
                     "tolerance": tol, "se_propagated": se_prop,
                     "passed": dev < tol})
    return CheckResult("smile-anchor", ok, 0.0, {"rows": rows})


# ---------------------------------------------------------------- criterion 9

@_timed
def check_arbitrage_dichotomy(n_paths=10_000, n_steps=500, expiry=1.0,
                              k1=90.0, k2=110.0, sigma_hat=0.5, seed=31415):
    """Two-strike drift with sigma_hat != 0; no drift for the controls."""
    params = MarketParams(r=0.0, s0=100.0, v0=0.04, sigma_hat=sigma_hat)
    path = simulate_market(params, expiry, n_steps, n_paths, seed)
    rep = arbitrage_strategy_bs(path, k1, k2, expiry)
    params0 = MarketParams(r=0.0, s0=100.0, v0=0.04, sigma_hat=0.0)
    path0 = simulate_market(params0, expiry, n_steps, n_paths, seed + 1)
    rep0 = arbitrage_strategy_bs(path0, k1, k2, expiry)
    rep1 = single_strike_strategy_bs(path, 100.0, expiry)
    ok = (abs(rep.t_stat) > T_STAT_ARBITRAGE
          and abs(rep0.t_stat) < T_STAT_CONTROL
          and abs(rep1.t_stat) < T_STAT_CONTROL
          and rep.wealth_identity_max < 1e-10
          and rep0.wealth_identity_max < 1e-10)
    return CheckResult("arbitrage-dichotomy", ok, 0.0, {
        "two_strike_t": rep.t_stat, "two_strike_mean": rep.mean,
        "two_strike_se": rep.std_error,
        "sigma0_t": rep0.t_stat, "single_strike_t": rep1.t_stat,
        "wealth_identity_max": max(rep.wealth_identity_max,
                                   rep0.wealth_identity_max,
                                   rep1.wealth_identity_max)})


# --------------------------------------------------------------- criterion 10

@_timed
def check_replication_scaling(n_paths=1000, steps=(64, 128, 256, 512),
                              horizon=0.5, expiry=1.0, k1=90.0, k2=110.0,
                              sigma_hat=0.5, seed=27182, table=None):
    """Accumulated replication residual shrinks ~ sqrt(dt) under the
    corrected rule; the naive rule stalls at its deterministic dt floor."""
    params = MarketParams(r=0.0, s0=100.0, v0=0.04, sigma_hat=sigma_hat)
    table = table or build_smile_rule_table(sigma_hat, expiry,
                                            nz=641, ny=193, nt=256)
    rule_s = TableRule(table, expiry)
    rule_n = NaiveBSRule(expiry)
    rms_s, rms_n = [], []
    for i, n in enumerate(steps):
        path = simulate_market(params, horizon, n, n_paths, seed + i)
        rms_s.append(replication_residual(path, rule_s, k1, k2, expiry).rms)
        rms_n.append(replication_residual(path, rule_n, k1, k2, expiry).rms)
    ratios_s = [rms_s[i] / rms_s[i + 1] for i in range(len(steps) - 1)]
    ratios_n = [rms_n[i] / rms_n[i + 1] for i in range(len(steps) - 1)]
    lo, hi = REPLICATION_RATIO_BAND
    ok = all(lo <= r <= hi for r in ratios_s) and ratios_n[-1] < NAIVE_FLOOR_RATIO
    return CheckResult("replication-scaling", ok, 0.0, {
        "steps": list(steps), "smile_rms": rms_s, "naive_rms": rms_n,
        "smile_ratios": ratios_s, "naive_ratios": ratios_n,
        "band": [lo, hi]})


# --------------------------------------------------------------- criterion 11

@_timed
def check_determinism(seed=555):
    """Identical seeds reproduce every stochastic artifact bit for bit."""
    params = MarketParams(r=0.0, s0=100.0, v0=0.04, sigma_hat=0.5)
    num = NumericsConfig(omega_max=20.0, d_omega=0.25, n_paths=2000,
                         m_steps=64, outer_stride=2, n_blocks=10, seed=seed)
    a = SmileEngine(params, 1.0, num).smile(np.array([90.0, 100.0, 110.0]),
                                            100.0, 0.04, 0.0)
    b = SmileEngine(params, 1.0, num).smile(np.array([90.0, 100.0, 110.0]),
                                            100.0, 0.04, 0.0)
    pa = simulate_market(params, 1.0, 64, 500, seed)
    pb = simulate_market(params, 1.0, 64, 500, seed)
    ok = (np.array_equal(a.prices, b.prices)
          and np.array_equal(a.implied_vols, b.implied_vols)
          and np.array_equal(a.std_errors, b.std_errors)
          and np.array_equal(pa.stock, pb.stock)
          and np.array_equal(pa.variance, pb.variance))
    return CheckResult("determinism", ok, 0.0,
                       {"smile_equal": bool(np.array_equal(a.prices, b.prices)),
                        "paths_equal": bool(np.array_equal(pa.stock, pb.stock))})


# --------------------------------------------------------------- table audit

@_timed
def check_table_residual(table: GridFunction, sigma_hat=None, max_l2=5e-4):
    """Full-operator residual of a supplied price-correction table.

    The table holds the unit-strike correction u, which solves the pricing
    operator against -phi on each side of the money; the residual must sit
    at discretization level there.  The stitch line itself carries the
    construction's derivative kink and is excluded (two rows around z = 0).
    A corrupted table fails loudly everywhere.
    """
    sh = sigma_hat if sigma_hat is not None else table.meta.get("sigma_hat")
    if sh is None:
        raise ValueError("sigma_hat missing (argument and table meta)")

    def src(zc, vr, tau):
        return -source_phi(np.exp(zc), vr, tau, 1.0, sh)

    i0 = int(np.argmin(np.abs(table.z)))
    sides = {
        "below": GridFunction(table.z[:i0 - 1], table.y, table.t,
                              table.values[:i0 - 1], meta=table.meta),
        "above": GridFunction(table.z[i0 + 2:], table.y, table.t,
                              table.values[i0 + 2:], meta=table.meta),
    }
    details = {"threshold_l2": max_l2}
    worst = 0.0
    for label, gf in sides.items():
        rep = residual(gf, src, sh)
        details[f"{label}_interior_l2"] = rep.interior_l2
        details[f"{label}_interior_max"] = rep.interior_max
        worst = max(worst, rep.interior_l2)
    return CheckResult("table-residual", bool(worst < max_l2), 0.0, details)


CHECKS = {
    "bs-kernel": check_bs_kernel,
    "source-term": check_source_term,
    "bs-residual-order": check_bs_residual_order,
    "parabU-vs-mc": check_parabU_vs_mc,
    "boundary-matching": check_boundary_matching,
    "oracle-equivalence": check_oracle_equivalence,
    "trivial-limits": check_trivial_limits,
    "smile-anchor": check_smile_anchor,
    "arbitrage-dichotomy": check_arbitrage_dichotomy,
    "replication-scaling": check_replication_scaling,
    "determinism": check_determinism,
}


def run_checks(names=None, overrides=None):
    """Run the named checks (all by default) with keyword overrides."""
    names = list(names) if names else list(CHECKS)
    overrides = overrides or {}
    results = []
    for name in names:
        if name not in CHECKS:
            raise KeyError(f"unknown check {name!r}; known: {sorted(CHECKS)}")
        results.append(CHECKS[name](**overrides.get(name, {})))
    return results
