"""Driftless lognormal variance paths and exponential integral functionals.

The variance follows dv = sigma_hat * v * dW with exact lognormal stepping
(no Euler bias, positivity preserved); the only discretization left is the
trapezoidal quadrature of the running integral int v dq.  RNG is the
counter-based Philox generator, so a (seed, stream) pair reproduces a batch
bit-identically regardless of threading.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGridError, UnstableFunctionalError

__all__ = ["VolPathBatch", "McEstimate", "simulate_paths",
           "integrated_variance", "exp_functional"]


@dataclass(frozen=True)
class McEstimate:
    mean: complex
    std_error: float
    n_paths: int


@dataclass(frozen=True)
class VolPathBatch:
    """Simulated variance paths v(s_k) on a grid t = s_0 < ... < s_M = T,
    with per-path running trapezoidal integrals of v."""
    times: np.ndarray               # (M+1,)
    values: np.ndarray              # (n_paths, M+1), > 0
    integrals: np.ndarray           # (n_paths, M+1), nondecreasing, [:,0] = 0
    sigma_hat: float
    seed: int
    stream: int = 0

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    def __post_init__(self):
        if np.any(self.values <= 0):
            raise ValueError("variance paths must stay positive")
        if np.any(np.diff(self.integrals, axis=1) < 0) or np.any(self.integrals[:, 0] != 0):
            raise ValueError("running integrals must start at 0 and be nondecreasing")


def _check_grid(grid: np.ndarray, t: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise InvalidGridError("time grid needs at least two nodes")
    if np.any(np.diff(grid) <= 0):
        raise InvalidGridError("time grid must be strictly increasing")
    if abs(grid[0] - t) > 1e-12:
        raise InvalidGridError(f"time grid must start at t = {t}, got {grid[0]}")
    return grid


def simulate_paths(v: float, t: float, grid, n_paths: int, seed: int,
                   sigma_hat: float, stream: int = 0) -> VolPathBatch:
    """Exact lognormal batch: v(s_{k+1}) = v(s_k) exp(sh*dW - sh^2*ds/2)."""
    grid = _check_grid(grid, t)
    if not v > 0:
        raise ValueError(f"initial variance must be > 0, got {v}")
    ds = np.diff(grid)
    values = np.empty((n_paths, grid.size))
    values[:, 0] = v
    if sigma_hat == 0.0:
        values[:, 1:] = v          # frozen variance, exactly
    else:
        rng = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, stream]))
        dw = rng.standard_normal((n_paths, ds.size)) * np.sqrt(ds)
        log_v = np.log(v) + np.cumsum(sigma_hat * dw - 0.5 * sigma_hat**2 * ds, axis=1)
        values[:, 1:] = np.exp(log_v)
    integrals = np.zeros_like(values)
    np.cumsum(0.5 * (values[:, :-1] + values[:, 1:]) * ds, axis=1,
              out=integrals[:, 1:])
    return VolPathBatch(times=grid, values=values, integrals=integrals,
                        sigma_hat=sigma_hat, seed=seed, stream=stream)


def integrated_variance(batch: VolPathBatch) -> np.ndarray:
    """Per-path trapezoidal int_t^T v dq."""
    return batch.integrals[:, -1].copy()


def exp_functional(batch: VolPathBatch, lam: complex, g,
                   outer_stride: int = 1) -> McEstimate:
    """Estimate E int_t^T exp(lam * int_t^s v dq) g(v(s), s) ds.

    Requires Re(lam) <= 0 so |exp| <= 1.  g(v_k, s_k) is called per time
    slice with the path vector v_k.  Trapezoid in s (optionally on every
    outer_stride-th node), exact sample mean over paths; the reported
    std_error is for the complex mean, sqrt(Var(Y)/n).
    """
    if lam.real > 0:
        raise UnstableFunctionalError(f"Re(lambda) = {lam.real} > 0")
    times = batch.times
    m = batch.n_steps
    if outer_stride < 1 or m % outer_stride:
        raise InvalidGridError(f"outer_stride {outer_stride} must divide {m}")
    ks = np.arange(0, m + 1, outer_stride)
    wq = np.empty(ks.size)
    sub = times[ks]
    wq[1:-1] = 0.5 * (sub[2:] - sub[:-2])
    wq[0] = 0.5 * (sub[1] - sub[0])
    wq[-1] = 0.5 * (sub[-1] - sub[-2])
    y = np.zeros(batch.n_paths, dtype=complex)
    for j, k in enumerate(ks):
        gk = np.asarray(g(batch.values[:, k], times[k]))
        if np.all(gk == 0):
            continue
        y += wq[j] * np.exp(lam * batch.integrals[:, k]) * gk
    mean = y.mean()
    var = np.mean(np.abs(y - mean) ** 2)
    n = batch.n_paths
    return McEstimate(mean=complex(mean),
                      std_error=float(np.sqrt(var / max(n - 1, 1))),
                      n_paths=n)
