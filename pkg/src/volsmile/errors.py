"""Exception types shared across the pricing engine."""


class VolsmileError(Exception):
    """Base class for engine errors."""


class DegenerateInputError(VolsmileError):
    """Raised where a formula is singular (t = T or v = 0); callers should
    use the payoff / deterministic limit instead."""


class NoSolutionError(VolsmileError):
    """Implied-volatility target outside the static no-arbitrage band."""


class ConvergenceError(VolsmileError):
    """Iteration failed to converge; message carries the best bracket."""


class InvalidGridError(VolsmileError):
    """Empty or non-monotone time/space grid."""


class UnstableFunctionalError(VolsmileError):
    """exp_functional called with Re(lambda) > 0."""


class TruncationError(VolsmileError):
    """Spatial truncation bound not reached within the allowed domain."""


class SpectralInconsistencyError(VolsmileError):
    """Imaginary residue of a reconstructed real field exceeds tolerance."""


class OutOfGridError(VolsmileError):
    """Interpolation requested outside a price table's domain."""


class ConfigError(VolsmileError):
    """Invalid run configuration (CLI exit code 2)."""
