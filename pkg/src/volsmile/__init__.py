"""Option pricing for a bond-stock-options market with lognormal stochastic
volatility: Black-Scholes plus a smile-generating correction computed in
Fourier space by Monte Carlo, cross-validated by a finite-difference solver,
with a market simulator for arbitrage and replication experiments."""

from .core_bs import (MarketParams, Moneyness, OptionSpec, bs_delta, bs_price,
                      bs_vega_v, bs_volga_v, d_plus_minus, discount_transforms,
                      implied_vol, payoff, source_phi)
from .vol_process import McEstimate, VolPathBatch, exp_functional, \
    integrated_variance, simulate_paths

__version__ = "0.1.0"
