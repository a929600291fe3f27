"""Finite-difference oracles evaluated in high precision.

The double-precision second difference of the price saturates at
~4*eps*price/h^2; evaluating the same difference quotient with mpmath makes
the oracle truncation-limited only, so sub-1e-4 relative comparisons are
meaningful everywhere on the test grids.
"""
import mpmath as mp

mp.mp.dps = 40
_H = mp.mpf("1e-5")


def _phi_mp(t):
    return mp.erfc(-t / mp.sqrt(2)) / 2


def bs_call_mp(x, v, tau, k):
    w = mp.sqrt(tau * v)
    dp = mp.log(x / k) / w + w / 2
    dm = dp - w
    return x * _phi_mp(dp) - k * _phi_mp(dm)


def volga_fd_mp(x, v, tau, k, h=_H):
    """Second central difference of the call price in v."""
    x, v, tau, k = map(mp.mpf, (x, v, tau, k))
    return float((bs_call_mp(x, v + h, tau, k) - 2 * bs_call_mp(x, v, tau, k)
                  + bs_call_mp(x, v - h, tau, k)) / h**2)
