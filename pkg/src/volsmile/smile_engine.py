"""Smile-generating correction to Black-Scholes, computed in Fourier space.

Pipeline, in unit-strike coordinates (everything is homogeneous of degree one
in the discounted strike, so k = 1 internally and results scale by k):

  1. f(z, v, s) = source_phi(e^z, v, T-s): the forcing the correction absorbs.
  2. F_m(w, v, s) = (2pi)^{-1/2} int_{I_m} e^{-iwz} f dz on half lines
     I_1 = (-inf, 0), I_2 = (0, inf), by trapezoid on slice-adaptive z grids.
  3. U_m(w, v, t) = E int_t^T exp(-(w^2+iw)/2 * int_t^s v dq) F_m(w, v_s, s) ds
     over exact lognormal variance paths; one shared path batch serves every
     frequency (common random numbers).  This is the Feynman-Kac solution of
     the per-frequency backward problem with source -F_m, i.e. the transform
     of the correction u satisfying  L[u] = -phi,  u(.,T) = 0.
  4. u(z, v, t) = (2pi)^{-1/2} int e^{iwz} U_m(w, v, t) dw,  z in I_m,
     computed on a symmetric truncated frequency grid (Hermitian symmetry is
     enforced by computing w >= 0 and conjugating).
  5. H = H_BS + u;  implied vols per strike give the smile.

Monte-Carlo errors are estimated from disjoint path blocks, so every derived
quantity (u values, one-sided derivatives, implied vols) carries a std error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

try:
    from threadpoolctl import threadpool_limits
except ImportError:                                    # pragma: no cover
    from contextlib import nullcontext

    def threadpool_limits(limits=None):
        return nullcontext()

from .core_bs import (MarketParams, OptionSpec, bs_price, bs_vega_v,
                      implied_vol, payoff, source_phi)
from .errors import (ConfigError, InvalidGridError, SpectralInconsistencyError,
                     TruncationError, VolsmileError)
from .vol_process import VolPathBatch, simulate_paths

__all__ = ["FrequencyGrid", "NumericsConfig", "SpectralSolution",
           "SmileCurve", "PriceResult", "CorrectionCurve", "SmileEngine",
           "forward_transform", "forward_transform_many", "compute_U",
           "inverse_transform"]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric grid w in [-omega_max, omega_max] with w = 0 a node."""
    omega_max: float = 40.0
    d_omega: float = 0.05

    def __post_init__(self):
        n = self.omega_max / self.d_omega
        if abs(n - round(n)) > 1e-9 or self.omega_max <= 0 or self.d_omega <= 0:
            raise InvalidGridError("omega_max must be an integer multiple of d_omega")

    @property
    def half(self) -> np.ndarray:
        """Non-negative frequencies; the negative side is conjugate."""
        n = int(round(self.omega_max / self.d_omega))
        return np.arange(n + 1) * self.d_omega

    @property
    def n_total(self) -> int:
        return 2 * int(round(self.omega_max / self.d_omega)) + 1


@dataclass(frozen=True)
class NumericsConfig:
    omega_max: float = 40.0
    d_omega: float = 0.05
    n_paths: int = 20_000
    m_steps: int = 256          # inner time resolution of the path integrals
    outer_stride: int = 4       # time-quadrature nodes: every stride-th step
    n_blocks: int = 20          # disjoint path blocks for std errors
    n_y: int = 97               # log-variance nodes of the transform tables
    y_pad: float = 0.02
    z_points_per_width: float = 3.0   # table z resolution in units of sqrt(tau*v)
    z_tail_eps: float = 1e-12
    z_max_cap: float = 60.0
    seed: int | None = None

    def __post_init__(self):
        if self.m_steps % self.outer_stride:
            raise ConfigError("outer_stride must divide m_steps")
        if self.n_paths % self.n_blocks:
            raise ConfigError("n_blocks must divide n_paths")

    @property
    def frequency_grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.omega_max, self.d_omega)


@dataclass
class SpectralSolution:
    """Fourier-space correction on one half line at a fixed (v, t)."""
    side: int
    omegas: np.ndarray            # non-negative frequencies
    u_hat: np.ndarray             # complex estimates of U_m(w, v, t)
    std_errors: np.ndarray
    n_paths: int
    block_values: np.ndarray      # (n_blocks, n_omega) per-block means

    def __post_init__(self):
        if self.side not in (1, 2):
            raise ValueError(f"side must be 1 or 2, got {self.side}")


@dataclass
class CorrectionCurve:
    """u on a z grid for unit discounted strike, with block std errors."""
    z: np.ndarray
    u: np.ndarray
    std_error: np.ndarray
    u0: dict                      # side -> (value, se) at z = 0
    du0: dict                     # side -> (one-sided derivative, se)
    diagnostics: dict


@dataclass
class PriceResult:
    price: float                  # undiscounted P_j(t, K)
    h: float                      # discounted H = H_BS + u
    h_bs: float
    u: float
    std_error: float
    x: float                      # discounted stock
    k_tilde: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class SmileCurve:
    strikes: np.ndarray
    prices: np.ndarray            # undiscounted option prices
    implied_vols: np.ndarray      # nan where inversion failed
    u: np.ndarray                 # discounted correction per strike
    h_bs: np.ndarray
    std_errors: np.ndarray
    vol_errors: np.ndarray        # propagated through vega
    at_money_strike: float
    at_money_index: int
    spot: float
    v: float
    t: float
    kind: str
    failures: list = field(default_factory=list)

    def rows(self):
        for i, k in enumerate(self.strikes):
            yield {"strike": float(k), "price": float(self.prices[i]),
                   "implied_vol": float(self.implied_vols[i]),
                   "u": float(self.u[i]), "h_bs": float(self.h_bs[i]),
                   "std_error": float(self.std_errors[i]),
                   "at_money": bool(i == self.at_money_index)}


# ------------------------------------------------------------- transforms

def _slice_z_grid(side, tau, v_lo, v_hi, points_per_width):
    """z quadrature grid for one time slice covering variances [v_lo, v_hi].

    Span and spacing both scale with the source width sqrt(tau v), so the
    point count depends only on (v_hi/v_lo) and points_per_width.
    """
    w_lo = math.sqrt(tau * v_lo)
    w_hi = math.sqrt(tau * v_hi)
    z_span = (8.0 + w_hi) * w_hi
    dz = w_lo / points_per_width
    n = min(int(math.ceil(z_span / dz)) + 1, 6001)
    n += 1 - n % 2              # odd count for composite Simpson
    if side == 2:
        return np.linspace(0.0, z_span, n)
    return np.linspace(-z_span, 0.0, n)


def _cap_grid(zg, side, z_max_cap):
    if abs(zg[0 if side == 1 else -1]) <= z_max_cap:
        return zg
    n = zg.size
    if side == 2:
        return np.linspace(0.0, z_max_cap, n)
    return np.linspace(-z_max_cap, 0.0, n)


def _simpson_weights(n, dz):
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (dz / 3.0)


def _transform_band(side, omegas, v_band, tau, sigma_hat, k_tilde,
                    points_per_width, z_tail_eps, z_max_cap):
    """Core transform for a narrow band of variances sharing one z grid."""
    v_lo, v_hi = float(v_band.min()), float(v_band.max())
    zg = _cap_grid(_slice_z_grid(side, tau, v_lo, v_hi, points_per_width),
                   side, z_max_cap)
    far = 0 if side == 1 else -1
    f = source_phi(k_tilde * np.exp(zg)[None, :], v_band[:, None], tau,
                   k_tilde, sigma_hat)
    fmax = np.abs(f).max()
    while fmax > 0 and np.abs(f[:, far]).max() > z_tail_eps * fmax:
        if abs(zg[far]) >= z_max_cap:
            raise TruncationError(
                f"source tail above {z_tail_eps}*max at |z| = {abs(zg[far])}")
        n = int(zg.size * 1.5)
        n += 1 - n % 2
        if side == 2:
            zg = np.linspace(0.0, 1.5 * zg[-1], n)
        else:
            zg = np.linspace(1.5 * zg[0], 0.0, n)
        f = source_phi(k_tilde * np.exp(zg)[None, :], v_band[:, None],
                       tau, k_tilde, sigma_hat)
        fmax = np.abs(f).max()
    wts = _simpson_weights(zg.size, zg[1] - zg[0])
    kern = np.exp(-1j * np.outer(zg, omegas)) * wts[:, None]
    with threadpool_limits(limits=1):
        return (f @ kern) / _SQRT_2PI


def forward_transform_many(side, omegas, v_array, tau, sigma_hat, *,
                           k_tilde=1.0, points_per_width=4.0,
                           z_tail_eps=1e-12, z_max_cap=60.0):
    """Half-line transform F_m(w, v, tau) for a vector of variances.

    Returns complex (n_v, n_omega).  Variances are grouped into bands of
    bounded ratio so each band shares one z grid of bounded size; the z
    truncation adapts until the integrand tail is below z_tail_eps relative
    to its peak, and exceeding z_max_cap raises TruncationError.
    """
    omegas = np.asarray(omegas, dtype=float)
    v_array = np.asarray(v_array, dtype=float)
    if sigma_hat == 0.0 or tau <= 0.0:
        return np.zeros((v_array.size, omegas.size), dtype=complex)
    order = np.argsort(v_array)
    v_sorted = v_array[order]
    out = np.empty((v_array.size, omegas.size), dtype=complex)
    start = 0
    while start < v_sorted.size:
        stop = int(np.searchsorted(v_sorted, 6.25 * v_sorted[start], "right"))
        stop = max(stop, start + 1)
        out[order[start:stop]] = _transform_band(
            side, omegas, v_sorted[start:stop], tau, sigma_hat, k_tilde,
            points_per_width, z_tail_eps, z_max_cap)
        start = stop
    return out


def forward_transform(side, omegas, v, tau, sigma_hat, **kw):
    """F_m(., v, tau) at a single state; see forward_transform_many."""
    return forward_transform_many(side, omegas, np.array([v]), tau,
                                  sigma_hat, **kw)[0]


def _build_f_tables(sides, omegas, y_nodes, s_nodes, expiry, sigma_hat, *,
                    k_tilde=1.0, points_per_width=2.0, z_tail_eps=1e-12,
                    z_max_cap=60.0):
    """F tables per side: complex (n_s, n_y, n_omega); F(., ., T) = 0."""
    v_nodes = np.exp(y_nodes)
    tabs = {m: np.zeros((s_nodes.size, y_nodes.size, omegas.size), dtype=complex)
            for m in sides}
    for k, s in enumerate(s_nodes):
        tau = expiry - s
        if tau <= 0:
            continue        # exact limit: the source mass vanishes at expiry
        for m in sides:
            tabs[m][k] = forward_transform_many(
                m, omegas, v_nodes, tau, sigma_hat, k_tilde=k_tilde,
                points_per_width=points_per_width, z_tail_eps=z_tail_eps,
                z_max_cap=z_max_cap)
    return tabs


# ------------------------------------------------------------- MC reduction

def _lagrange_cubic_weights(xi, n_nodes):
    """4-point Lagrange interpolation on a uniform grid.

    xi is the fractional node coordinate; returns (base_idx, weights[..., 4]).
    """
    base = np.clip(np.floor(xi).astype(int) - 1, 0, n_nodes - 4)
    loc = xi - base
    w = np.empty(xi.shape + (4,))
    w[..., 0] = -(loc - 1) * (loc - 2) * (loc - 3) / 6.0
    w[..., 1] = loc * (loc - 2) * (loc - 3) / 2.0
    w[..., 2] = -loc * (loc - 1) * (loc - 3) / 2.0
    w[..., 3] = loc * (loc - 1) * (loc - 2) / 6.0
    return base, w


class _PathReduction:
    """Precomputed per-batch machinery shared by all frequencies.

    Holds the outer time-quadrature weights, the per-(path, node) cubic
    stencils onto the y table (as one block sparse matrix stacked over path
    blocks), and the running integrals at the outer nodes.
    """

    def __init__(self, batch: VolPathBatch, y_nodes, outer_stride, n_blocks):
        m = batch.n_steps
        ks = np.arange(0, m + 1, outer_stride)
        times = batch.times[ks]
        self.s_nodes = times
        wq = np.empty(ks.size)
        wq[1:-1] = 0.5 * (times[2:] - times[:-2])
        wq[0] = 0.5 * (times[1] - times[0])
        wq[-1] = 0.5 * (times[-1] - times[-2])
        self.wq = wq
        self.I = np.ascontiguousarray(batch.integrals[:, ks])
        v_out = batch.values[:, ks]
        n_p, n_k = v_out.shape
        n_y = y_nodes.size
        hy = y_nodes[1] - y_nodes[0]
        xi = (np.log(v_out) - y_nodes[0]) / hy
        base, wts = _lagrange_cubic_weights(xi, n_y)
        # rows: block-major (b, k, j); cols: path-major (p, k)
        per_block = n_p // n_blocks
        p_idx = np.arange(n_p)[:, None, None]
        k_idx = np.arange(n_k)[None, :, None]
        block = p_idx // per_block
        rows = (block * (n_k * n_y) + k_idx * n_y
                + base[:, :, None] + np.arange(4)[None, None, :])
        cols = np.broadcast_to((p_idx * n_k + k_idx), rows.shape)
        mat = sparse.csr_matrix(
            (wts.ravel(), (rows.ravel(), cols.ravel())),
            shape=(n_blocks * n_k * n_y, n_p * n_k))
        self.stencil = mat
        self.n_blocks = n_blocks
        self.n_k = n_k
        self.n_y = n_y
        self.n_paths = n_p
        self.per_block = per_block

    def reduce(self, f_tabs, omegas):
        """Per-block U estimates for each side: {side: (n_blocks, n_omega)}."""
        omegas = np.asarray(omegas, dtype=float)
        n_om = omegas.size
        out = {m: np.empty((self.n_blocks, n_om), dtype=complex) for m in f_tabs}
        wf = {m: self.wq[:, None, None] * f_tabs[m] for m in f_tabs}
        I = self.I.ravel()
        # E_a = exp(lam(w_a) I), lam(w) = -(w^2 + iw)/2.  On the standard
        # uniform grid starting at 0 the exponentials satisfy the recursion
        # E_{a+1} = E_a G_a, G_{a+1} = G_a Q, replacing one complex exp per
        # element with two multiplies.
        d = np.diff(omegas)
        uniform = (omegas[0] == 0.0 and d.size > 0
                   and np.allclose(d, d[0], rtol=1e-12, atol=0.0))
        if uniform:
            dw = d[0]
            E = np.ones_like(I, dtype=complex)
            G = np.exp(-(dw**2 + 1j * dw) * I / 2.0)
            Q = np.exp(-dw**2 * I)
        scale = 1.0 / self.per_block
        for a in range(n_om):
            if not uniform:
                E = np.exp(-(omegas[a] ** 2 + 1j * omegas[a]) * I / 2.0)
            T = (self.stencil @ E.real) + 1j * (self.stencil @ E.imag)
            T = T.reshape(self.n_blocks, self.n_k, self.n_y)
            for m, tab in wf.items():
                out[m][:, a] = scale * np.einsum("bkj,kj->b", T, tab[:, :, a])
            if uniform and a + 1 < n_om:
                E *= G
                G *= Q
        return out


def compute_U(side, omegas, batch: VolPathBatch, expiry, sigma_hat, *,
              n_blocks=20, outer_stride=4, n_y=97, y_pad=0.02,
              z_points_per_width=2.0, z_tail_eps=1e-12, z_max_cap=60.0,
              f_override=None):
    """Monte-Carlo estimate of U_m(w, v, t) for all w >= 0 on one side.

    U_m = E int_t^T exp(-(w^2+iw)/2 int_t^s v dq) F_m(w, v_s, s) ds with F_m
    interpolated (cubic in log v) from per-slice tables aligned with the
    outer time nodes.  Errors come from disjoint path blocks.  f_override, if
    given, replaces the transform tables (same shape contract) and is used
    by validation tests.
    """
    omegas = np.asarray(omegas, dtype=float)
    y_nodes = _y_nodes(batch, n_y, y_pad, outer_stride)
    red = _PathReduction(batch, y_nodes, outer_stride, n_blocks)
    if f_override is not None:
        tabs = {side: f_override(red.s_nodes, y_nodes, omegas)}
    else:
        tabs = _build_f_tables([side], omegas, y_nodes, red.s_nodes, expiry,
                               sigma_hat, points_per_width=z_points_per_width,
                               z_tail_eps=z_tail_eps, z_max_cap=z_max_cap)
    blocks = red.reduce(tabs, omegas)[side]
    return _solution_from_blocks(side, omegas, blocks, red.n_paths)


def _solution_from_blocks(side, omegas, blocks, n_paths):
    mean = blocks.mean(axis=0)
    b = blocks.shape[0]
    se = np.sqrt(np.mean(np.abs(blocks - mean[None, :]) ** 2, axis=0)
                 / max(b - 1, 1))
    return SpectralSolution(side=side, omegas=np.asarray(omegas, dtype=float),
                            u_hat=mean, std_errors=se, n_paths=n_paths,
                            block_values=blocks)


def _y_nodes(batch, n_y, y_pad, outer_stride):
    v_out = batch.values[:, ::outer_stride]
    lo = math.log(v_out.min()) - y_pad
    hi = math.log(v_out.max()) + y_pad
    if hi - lo < 1e-6:
        lo -= 5e-7
        hi += 5e-7
    return np.linspace(lo, hi, n_y)


# ------------------------------------------------------------- inversion

def inverse_transform(sol: SpectralSolution, z_points, *, d_omega=None,
                      imag_tol=1e-8):
    """u(z) = (2pi)^{-1/2} int e^{iwz} U(w) dw on the truncated grid.

    Hermitian symmetry supplies w < 0; the imaginary residue of the full
    symmetric sum reduces to |Im U(0)| and is asserted below imag_tol
    relative to max|u|.  Returns (u, std_error) per z point.
    """
    z_points = np.atleast_1d(np.asarray(z_points, dtype=float))
    om = sol.omegas
    if d_omega is None:
        d_omega = om[1] - om[0]
    w_tr = np.ones(om.size)
    w_tr[-1] = 0.5
    if om[0] == 0.0:
        w_tr[0] = 0.5
    phase = np.exp(1j * np.outer(z_points, om))        # (n_z, n_om)
    # full symmetric trapezoid: U(0) + 2 sum_{w>0} Re(e^{iwz} U(w))
    blocks = sol.block_values                           # (B, n_om)
    core = (phase[None, :, :] * (blocks[:, None, :] * w_tr[None, None, :])).real
    u_b = d_omega / _SQRT_2PI * (2.0 * core.sum(axis=2)
                                 - blocks[:, 0].real[:, None])
    u = u_b.mean(axis=0)
    b = u_b.shape[0]
    se = u_b.std(axis=0, ddof=1) / math.sqrt(b)
    resid = abs(complex(blocks.mean(axis=0)[0]).imag) * d_omega / _SQRT_2PI
    scale = max(float(np.max(np.abs(u))), 1e-300)
    if resid > imag_tol * scale:
        raise SpectralInconsistencyError(
            f"imaginary residue {resid} exceeds {imag_tol} * max|u| = "
            f"{imag_tol * scale}")
    return u, se, u_b


# ------------------------------------------------------------- engine

class SmileEngine:
    """Prices H = H_BS + u for one expiry; one path batch per (v, t) state
    serves every strike and frequency (common random numbers)."""

    def __init__(self, params: MarketParams, expiry: float,
                 numerics: NumericsConfig | None = None):
        self.params = params
        self.expiry = float(expiry)
        self.numerics = numerics or NumericsConfig()
        if params.sigma_hat != 0.0 and self.numerics.seed is None:
            raise ConfigError("seed is required when sigma_hat != 0 "
                              "(stochastic pricing path)")
        self._states: dict = {}

    # ---------------- spectral state management

    def _state(self, v, t):
        key = (round(float(v), 14), round(float(t), 14))
        if key not in self._states:
            self._states[key] = self._compute_state(float(v), float(t))
        return self._states[key]

    def _compute_state(self, v, t):
        cfg = self.numerics
        grid = np.linspace(t, self.expiry, cfg.m_steps + 1)
        batch = simulate_paths(v, t, grid, cfg.n_paths, cfg.seed,
                               self.params.sigma_hat)
        y_nodes = _y_nodes(batch, cfg.n_y, cfg.y_pad, cfg.outer_stride)
        red = _PathReduction(batch, y_nodes, cfg.outer_stride, cfg.n_blocks)
        om = cfg.frequency_grid.half
        tabs = _build_f_tables((1, 2), om, y_nodes, red.s_nodes, self.expiry,
                               self.params.sigma_hat,
                               points_per_width=cfg.z_points_per_width,
                               z_tail_eps=cfg.z_tail_eps,
                               z_max_cap=cfg.z_max_cap)
        blocks = red.reduce(tabs, om)
        sols = {m: _solution_from_blocks(m, om, blocks[m], cfg.n_paths)
                for m in (1, 2)}
        return sols

    # ---------------- correction evaluation (unit strike)

    def correction_curve(self, v, t, z_points) -> CorrectionCurve:
        """u and block std errors at z_points; z = 0 reported per side."""
        z_points = np.atleast_1d(np.asarray(z_points, dtype=float))
        if self.params.sigma_hat == 0.0 or t >= self.expiry:
            zero = np.zeros_like(z_points)
            return CorrectionCurve(z=z_points, u=zero, std_error=zero,
                                   u0={1: (0.0, 0.0), 2: (0.0, 0.0)},
                                   du0={1: (0.0, 0.0), 2: (0.0, 0.0)},
                                   diagnostics={"trivial": True})
        sols = self._state(v, t)
        u = np.empty_like(z_points)
        se = np.empty_like(z_points)
        for m, mask in ((1, z_points < 0), (2, z_points >= 0)):
            if mask.any():
                u[mask], se[mask], _ = inverse_transform(sols[m], z_points[mask])
        u0, du0 = {}, {}
        hz = 0.05
        for m, sgn in ((1, -1.0), (2, 1.0)):
            zb = sgn * hz * np.arange(3.0)
            ub, seb, u_blocks = inverse_transform(sols[m], zb)
            u0[m] = (float(ub[0]), float(seb[0]))
            der_b = sgn * (-3 * u_blocks[:, 0] + 4 * u_blocks[:, 1]
                           - u_blocks[:, 2]) / (2 * hz)
            du0[m] = (float(der_b.mean()),
                      float(der_b.std(ddof=1) / math.sqrt(der_b.size)))
        diag = {}
        for m in (1, 2):
            mag = np.abs(sols[m].u_hat)
            peak = float(mag.max())
            diag[f"u_hat_peak_side{m}"] = peak
            diag[f"u_hat_tail_ratio_side{m}"] = float(mag[-1] / peak) if peak else 0.0
            diag[f"mc_se_median_side{m}"] = float(np.median(sols[m].std_errors))
        return CorrectionCurve(z=z_points, u=u, std_error=se, u0=u0, du0=du0,
                               diagnostics=diag)

    # ---------------- pricing

    def price(self, option: OptionSpec, spot: float, v: float, t: float,
              ) -> PriceResult:
        """Undiscounted price at state (S(t) = spot, v(t) = v, time t)."""
        if abs(option.expiry - self.expiry) > 1e-12:
            raise ConfigError("option expiry does not match the engine expiry")
        r = self.params.r
        x = math.exp(-r * t) * spot
        k = option.discounted_strike(r)
        tau = self.expiry - t
        if tau <= 0:
            h = float(payoff(x, k, option.kind))
            return PriceResult(price=math.exp(r * t) * h, h=h,
                               h_bs=h, u=0.0, std_error=0.0, x=x, k_tilde=k)
        h_bs = float(bs_price(x, v, tau, k, option.kind))
        if self.params.sigma_hat == 0.0:
            return PriceResult(price=math.exp(r * t) * h_bs, h=h_bs, h_bs=h_bs,
                               u=0.0, std_error=0.0, x=x, k_tilde=k,
                               diagnostics={"trivial": True})
        z0 = math.log(x / k)
        sols = self._state(v, t)
        side = 1 if z0 < 0 else 2
        u_unit, se_unit, _ = inverse_transform(sols[side], np.array([z0]))
        u = k * float(u_unit[0])
        se = k * float(se_unit[0])
        h = h_bs + u
        return PriceResult(price=math.exp(r * t) * h, h=h, h_bs=h_bs, u=u,
                           std_error=se, x=x, k_tilde=k,
                           diagnostics={"z": z0, "side": side})

    def smile(self, strikes, spot: float, v: float, t: float,
              kind: str = "call") -> SmileCurve:
        """Price every strike off one spectral state and invert to a smile."""
        strikes = np.asarray(strikes, dtype=float)
        if np.any(strikes <= 0):
            raise ConfigError("strikes must be positive")
        r = self.params.r
        x = math.exp(-r * t) * spot
        tau = self.expiry - t
        k_t = np.exp(-r * self.expiry) * strikes
        h_bs = bs_price(x, v, tau, k_t, kind)
        if self.params.sigma_hat == 0.0:
            u = np.zeros_like(k_t)
            se = np.zeros_like(k_t)
        else:
            sols = self._state(v, t)
            z = np.log(x / k_t)
            u_unit = np.empty_like(z)
            se_unit = np.empty_like(z)
            for m, mask in ((1, z < 0), (2, z >= 0)):
                if mask.any():
                    u_unit[mask], se_unit[mask], _ = inverse_transform(
                        sols[m], z[mask])
            u = k_t * u_unit
            se = k_t * se_unit
        prices = h_bs + u
        vols = np.full_like(prices, np.nan)
        vol_errs = np.full_like(prices, np.nan)
        failures = []
        for i in range(strikes.size):
            try:
                vols[i] = implied_vol(float(prices[i]), x, tau, float(k_t[i]), kind)
                vega = float(bs_vega_v(x, max(vols[i], 1e-12), tau, float(k_t[i])))
                if vega > 0:
                    vol_errs[i] = se[i] / vega
            except VolsmileError as exc:
                failures.append({"strike": float(strikes[i]), "error": str(exc)})
        k_atm = math.exp(r * tau) * spot
        i_atm = int(np.argmin(np.abs(strikes - k_atm)))
        return SmileCurve(strikes=strikes,
                          prices=np.exp(r * t) * prices,
                          implied_vols=vols, u=u, h_bs=h_bs, std_errors=se,
                          vol_errors=vol_errs, at_money_strike=k_atm,
                          at_money_index=i_atm, spot=spot, v=v, t=t, kind=kind,
                          failures=failures)
