"""Finite-difference oracle for the pricing PDE in log coordinates.

Everything here works on (z, y, t) with z = log(x/k) and y = log(v), where
the operator of the pricing equation becomes

    L[psi] = psi_t + (e^y/2)(psi_zz - psi_z) + (sh^2/2)(psi_yy - psi_y),

so a candidate surface solves L[psi] = source.  solve_bvp marches backward
from psi(.,.,T) = 0 with Crank-Nicolson time stepping and Peaceman-Rachford
operator splitting (tridiagonal solves per line, second order).  On a half
line the z = 0 condition imposed is Dirichlet only; the one-sided Neumann
derivative there is measured and reported, never enforced.  solve_parabU is
the per-frequency 1-D companion used to validate the Monte-Carlo
representation of the Fourier-space solution.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded

from .errors import InvalidGridError, OutOfGridError

__all__ = ["GridFunction", "PdeResidualReport", "BvpResult", "ParabUResult",
           "solve_bvp", "solve_parabU", "residual", "rho_weight",
           "weighted_l2"]


def rho_weight(y):
    """Spatial weight 1/(1 + e^{3y}) used by the energy diagnostics."""
    return 1.0 / (1.0 + np.exp(3.0 * np.asarray(y, dtype=float)))


def weighted_l2(values, y, axis=0):
    """Discrete rho-weighted L2 norm along the y axis."""
    y = np.asarray(y, dtype=float)
    w = rho_weight(y) * np.gradient(y)
    shape = [1] * np.asarray(values).ndim
    shape[axis] = y.size
    return np.sqrt(np.sum(np.abs(values) ** 2 * w.reshape(shape), axis=axis))


@dataclass
class GridFunction:
    """Field on a (z, y, t) box; y = log v.  Binary+JSON round-trippable."""
    z: np.ndarray
    y: np.ndarray
    t: np.ndarray
    values: np.ndarray            # (nz, ny, nt)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        for g, name in ((self.z, "z"), (self.y, "y"), (self.t, "t")):
            if g.ndim != 1 or (g.size > 1 and np.any(np.diff(g) <= 0)):
                raise InvalidGridError(f"{name} grid must be strictly increasing")
        if self.values.shape != (self.z.size, self.y.size, self.t.size):
            raise InvalidGridError(
                f"values shape {self.values.shape} does not match grids "
                f"({self.z.size}, {self.y.size}, {self.t.size})")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    def save(self, path) -> None:
        """Write <path>.json header and <path>.bin payload (C-order f8)."""
        path = Path(path)
        header = {
            "dims": list(self.values.shape),
            "dtype": "float64",
            "endianness": "little",
            "order": "C",
            "z": self.z.tolist(),
            "y": self.y.tolist(),
            "t": self.t.tolist(),
            "meta": self.meta,
        }
        path.with_suffix(".json").write_text(json.dumps(header, sort_keys=True))
        self.values.astype("<f8").tofile(path.with_suffix(".bin"))

    @classmethod
    def load(cls, path) -> "GridFunction":
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text())
        if header["dtype"] != "float64" or header["endianness"] != "little":
            raise ValueError(f"unsupported layout: {header}")
        values = np.fromfile(path.with_suffix(".bin"), dtype="<f8")
        values = values.reshape(header["dims"])
        return cls(z=np.array(header["z"]), y=np.array(header["y"]),
                   t=np.array(header["t"]), values=values,
                   meta=header.get("meta", {}))

    def to_csv(self, path, limit=200_000) -> None:
        if self.values.size > limit:
            raise ValueError(f"grid too large for CSV ({self.values.size} values)")
        with open(path, "w") as fh:
            fh.write("z,y,t,value\n")
            for i, z in enumerate(self.z):
                for j, y in enumerate(self.y):
                    for n, t in enumerate(self.t):
                        fh.write(f"{z!r},{y!r},{t!r},{self.values[i, j, n]!r}\n")

    def interp(self, z, y, t):
        """Vectorized trilinear interpolation; OutOfGridError outside the box."""
        z = np.asarray(z, dtype=float)
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        out_shape = np.broadcast(z, y, t).shape
        vals = np.zeros(out_shape)
        idx = []
        for pts, grid, name in ((z, self.z, "z"), (y, self.y, "y"), (t, self.t, "t")):
            eps = 1e-12 * max(1.0, abs(grid[0]), abs(grid[-1]))
            if np.any(pts < grid[0] - eps) or np.any(pts > grid[-1] + eps):
                raise OutOfGridError(
                    f"{name} in [{np.min(pts)}, {np.max(pts)}] outside "
                    f"[{grid[0]}, {grid[-1]}]")
            if grid.size == 1:
                idx.append((np.zeros(out_shape, dtype=int), np.zeros(out_shape)))
                continue
            i = np.clip(np.searchsorted(grid, pts) - 1, 0, grid.size - 2)
            i = np.broadcast_to(i, out_shape)
            frac = (np.broadcast_to(pts, out_shape) - grid[i]) / (grid[i + 1] - grid[i])
            idx.append((i, np.clip(frac, 0.0, 1.0)))
        (iz, fz), (iy, fy), (it, ft) = idx
        V = self.values
        for dz_, wz in ((0, 1 - fz), (1, fz)):
            for dy_, wy in ((0, 1 - fy), (1, fy)):
                for dt_, wt in ((0, 1 - ft), (1, ft)):
                    iz_ = np.minimum(iz + dz_, self.z.size - 1)
                    iy_ = np.minimum(iy + dy_, self.y.size - 1)
                    it_ = np.minimum(it + dt_, self.t.size - 1)
                    vals += wz * wy * wt * V[iz_, iy_, it_]
        return vals


@dataclass(frozen=True)
class PdeResidualReport:
    interior_max: float
    interior_l2: float
    dirichlet_at_zero: float      # max |candidate| on the z = 0 line (nan if absent)
    neumann_at_zero: float        # max one-sided |d/dz| at z = 0 (nan if absent)
    terminal_max: float
    h_z: float
    h_y: float
    h_t: float


@dataclass
class BvpResult:
    grid: GridFunction             # stored time slices of the solution
    neumann_at_zero: np.ndarray    # measured one-sided dpsi/dz(0, y) at t grid
    side: int | None


@dataclass
class ParabUResult:
    y: np.ndarray
    t: np.ndarray
    values: np.ndarray             # complex (ny, nt)
    omega: float
    weighted_norms: np.ndarray     # rho-weighted L2 of each time slice
    source_norm: float             # ||F||_L2([0,T]; L2(rho))


# ------------------------------------------------------------------ stencils

def _explicit_apply(u, coef_col, h, axis):
    """coef * (D2 - D1) with central differences and zero Dirichlet borders.

    coef_col broadcasts along the orthogonal axis; u is (nz, ny).
    """
    out = np.zeros_like(u)
    lo = coef_col * (1.0 / h**2 + 1.0 / (2 * h))
    mid = coef_col * (-2.0 / h**2)
    hi = coef_col * (1.0 / h**2 - 1.0 / (2 * h))
    if axis == 0:
        out[1:-1, :] = lo * u[:-2, :] + mid * u[1:-1, :] + hi * u[2:, :]
    else:
        out[:, 1:-1] = lo * u[:, :-2] + mid * u[:, 1:-1] + hi * u[:, 2:]
    return out


def _banded_factors(coef_per_line, n_interior, n_lines, h, dt_half):
    """Banded array for (I - dt_half * coef * (D2 - D1)) on stacked lines.

    Rows are interior nodes of consecutive decoupled lines; the returned
    array follows the scipy solve_banded (1, 1) layout.
    """
    coefs = np.broadcast_to(np.asarray(coef_per_line, dtype=float), (n_lines,))
    c = np.repeat(coefs, n_interior)
    diag = 1.0 + dt_half * c * 2.0 / h**2
    up = -dt_half * c * (1.0 / h**2 - 1.0 / (2 * h))    # couples to node i+1
    lo = -dt_half * c * (1.0 / h**2 + 1.0 / (2 * h))    # couples to node i-1
    up[n_interior - 1::n_interior] = 0.0                # line ends
    lo[0::n_interior] = 0.0                             # line starts
    ab = np.zeros((3, n_interior * n_lines))
    ab[1] = diag
    ab[0, 1:] = up[:-1]
    ab[2, :-1] = lo[1:]
    return ab


# ------------------------------------------------------------------ solvers

def solve_bvp(source, sigma_hat, expiry, *, side=2, z_max=6.0, nz=257,
              y_min=math.log(1e-4), y_max=math.log(4.0), ny=257, nt=512,
              store="final"):
    """March L[psi] = source backward from psi(T) = 0.

    source(z_col, v_row, tau) -> (nz, ny) array, evaluated at half steps.
    side=1 solves on [-z_max, 0], side=2 on [0, z_max], side=None on the
    full line without any interior condition.  Dirichlet zero on all outer
    edges; on a half line also at z = 0.  store="final" keeps the t = 0
    slice, store="all" the whole history.
    """
    if side == 1:
        z = np.linspace(-z_max, 0.0, nz)
    elif side == 2:
        z = np.linspace(0.0, z_max, nz)
    elif side is None:
        z = np.linspace(-z_max, z_max, nz)
    else:
        raise ValueError(f"side must be 1, 2 or None, got {side}")
    y = np.linspace(y_min, y_max, ny)
    v = np.exp(y)
    hz = z[1] - z[0]
    hy = y[1] - y[0]
    dt = expiry / nt
    t_nodes = np.linspace(0.0, expiry, nt + 1)

    cz = v / 2.0                     # z-operator coefficient per y line
    cy = sigma_hat**2 / 2.0
    ab_z = _banded_factors(cz[1:-1], nz - 2, ny - 2, hz, dt / 2.0)
    ab_y = _banded_factors(cy, ny - 2, nz - 2, hy, dt / 2.0)

    psi = np.zeros((nz, ny))
    history = [psi.copy()] if store == "all" else None
    neumann = [0.0]

    for n in range(nt):
        tau_mid = (n + 0.5) * dt                  # backward time at half step
        g = -np.asarray(source(z[:, None], v[None, :], tau_mid))
        rhs = psi + (dt / 2.0) * _explicit_apply(psi, cy, hy, axis=1) + (dt / 2.0) * g
        half = np.zeros_like(psi)
        sol = solve_banded((1, 1), ab_z, rhs[1:-1, 1:-1].T.ravel())
        half[1:-1, 1:-1] = sol.reshape(ny - 2, nz - 2).T
        rhs2 = half + (dt / 2.0) * _explicit_apply(half, cz[None, :], hz, axis=0) \
            + (dt / 2.0) * g
        nxt = np.zeros_like(psi)
        sol = solve_banded((1, 1), ab_y, rhs2[1:-1, 1:-1].ravel())
        nxt[1:-1, 1:-1] = sol.reshape(nz - 2, ny - 2)
        psi = nxt
        if store == "all":
            history.append(psi.copy())
        if side == 2:
            neumann.append(float(np.max(np.abs(
                (-3 * psi[0, :] + 4 * psi[1, :] - psi[2, :]) / (2 * hz)))))
        elif side == 1:
            neumann.append(float(np.max(np.abs(
                (3 * psi[-1, :] - 4 * psi[-2, :] + psi[-3, :]) / (2 * hz)))))
        else:
            neumann.append(float("nan"))

    if store == "all":
        values = np.stack(history[::-1], axis=-1)   # reorder to forward time
        t_out = t_nodes
    else:
        values = psi[:, :, None]
        t_out = np.array([0.0])
    gf = GridFunction(z=z, y=y, t=t_out, values=values,
                      meta={"sigma_hat": sigma_hat, "expiry": expiry,
                            "side": side if side is not None else 0})
    return BvpResult(grid=gf, neumann_at_zero=np.array(neumann[::-1]), side=side)


def solve_parabU(omega, source_F, sigma_hat, expiry, *,
                 y_min=math.log(1e-4), y_max=math.log(4.0), ny=257, nt=512):
    """Backward Crank-Nicolson solve of the per-frequency problem

        U_t + (-(omega^2) - i*omega) (v/2) U + (sh^2/2)(U_yy - U_y) = F,
        U(., T) = 0,  far-field Dirichlet zero in y.

    source_F(v_row, tau) -> complex (ny,) evaluated at half steps.
    """
    y = np.linspace(y_min, y_max, ny)
    v = np.exp(y)
    hy = y[1] - y[0]
    dt = expiry / nt
    cy = sigma_hat**2 / 2.0
    react = -(omega**2 + 1j * omega) * v / 2.0      # reaction coefficient
    # (I - dt/2 (A + react)) on interior nodes
    ab = np.zeros((3, ny - 2), dtype=complex)
    ab[1, :] = 1.0 + (dt / 2.0) * (cy * 2.0 / hy**2 - react[1:-1])
    up = -(dt / 2.0) * cy * (1.0 / hy**2 - 1.0 / (2 * hy))
    lo = -(dt / 2.0) * cy * (1.0 / hy**2 + 1.0 / (2 * hy))
    ab[0, 1:] = up
    ab[2, :-1] = lo

    U = np.zeros((ny, nt + 1), dtype=complex)       # forward-time order
    norms = np.zeros(nt + 1)
    src_sq = 0.0
    cur = np.zeros(ny, dtype=complex)
    for n in range(nt):
        tau_mid = (n + 0.5) * dt
        F = np.asarray(source_F(v, tau_mid), dtype=complex)
        src_sq += dt * weighted_l2(F, y) ** 2
        expl = np.zeros_like(cur)
        expl[1:-1] = (cur[:-2] * (cy / hy**2 + cy / (2 * hy))
                      + cur[1:-1] * (-2 * cy / hy**2)
                      + cur[2:] * (cy / hy**2 - cy / (2 * hy)))
        rhs = cur + (dt / 2.0) * (expl + react * cur) - dt * F
        nxt = np.zeros_like(cur)
        nxt[1:-1] = solve_banded((1, 1), ab, rhs[1:-1])
        cur = nxt
        U[:, nt - 1 - n] = cur
        norms[nt - 1 - n] = weighted_l2(cur, y)
    t_nodes = np.linspace(0.0, expiry, nt + 1)
    return ParabUResult(y=y, t=t_nodes, values=U, omega=omega,
                        weighted_norms=norms, source_norm=math.sqrt(src_sq))


def residual(gf: GridFunction, source, sigma_hat, *, terminal=None):
    """Central-difference residual of L[candidate] - source at interior nodes.

    The candidate must carry at least 3 time slices.  Boundary residuals: the
    z = 0 line value (Dirichlet) and the one-sided z-derivative there
    (Neumann) if z = 0 is a grid node; |candidate(T) - terminal| if t = T is
    stored (terminal defaults to zero).
    """
    z, y, t, V = gf.z, gf.y, gf.t, gf.values
    if t.size < 3:
        raise InvalidGridError("residual needs >= 3 stored time slices")
    hz, hy = z[1] - z[0], y[1] - y[0]
    ht = t[1] - t[0]
    v = np.exp(y)
    dV_t = (V[:, :, 2:] - V[:, :, :-2]) / (2 * ht)
    Lz = (V[:-2, :, 1:-1] * (1.0 / hz**2 + 1.0 / (2 * hz))
          + V[1:-1, :, 1:-1] * (-2.0 / hz**2)
          + V[2:, :, 1:-1] * (1.0 / hz**2 - 1.0 / (2 * hz)))
    Ly = (V[:, :-2, 1:-1] * (1.0 / hy**2 + 1.0 / (2 * hy))
          + V[:, 1:-1, 1:-1] * (-2.0 / hy**2)
          + V[:, 2:, 1:-1] * (1.0 / hy**2 - 1.0 / (2 * hy)))
    op = (dV_t[1:-1, 1:-1, :]
          + (v[None, 1:-1, None] / 2.0) * Lz[:, 1:-1, :]
          + (sigma_hat**2 / 2.0) * Ly[1:-1, :, :])
    expiry = float(gf.meta.get("expiry", t[-1]))
    src = np.empty_like(op)
    for n in range(1, t.size - 1):
        src[:, :, n - 1] = source(z[1:-1, None], v[None, 1:-1], expiry - t[n])
    res = op - src
    i0 = np.flatnonzero(np.isclose(z, 0.0, atol=1e-12))
    if i0.size:
        i0 = int(i0[0])
        dirichlet = float(np.max(np.abs(V[i0, :, :])))
        if 2 <= i0 <= z.size - 3:
            side_d = max(
                np.max(np.abs((-3 * V[i0] + 4 * V[i0 + 1] - V[i0 + 2]) / (2 * hz))),
                np.max(np.abs((3 * V[i0] - 4 * V[i0 - 1] + V[i0 - 2]) / (2 * hz))))
        elif i0 == 0:
            side_d = np.max(np.abs((-3 * V[0] + 4 * V[1] - V[2]) / (2 * hz)))
        else:
            side_d = np.max(np.abs((3 * V[-1] - 4 * V[-2] + V[-3]) / (2 * hz)))
        neumann = float(side_d)
    else:
        dirichlet = float("nan")
        neumann = float("nan")
    if terminal is None:
        term_ref = 0.0
    else:
        term_ref = terminal
    if np.isclose(t[-1], gf.meta.get("expiry", t[-1])):
        terminal_max = float(np.max(np.abs(V[:, :, -1] - term_ref)))
    else:
        terminal_max = float("nan")
    return PdeResidualReport(
        interior_max=float(np.max(np.abs(res))),
        interior_l2=float(np.sqrt(np.mean(res**2))),
        dirichlet_at_zero=dirichlet,
        neumann_at_zero=neumann,
        terminal_max=terminal_max,
        h_z=float(hz), h_y=float(hy), h_t=float(ht))
