"""Exception hierarchy shared by all modules."""


class VarReinsError(Exception):
    """Base class for every error raised by this package."""


class SingularVolatility(VarReinsError):
    """The 2x2 volatility matrix is not invertible (|rho| = 1)."""


class DegenerateOption(VarReinsError):
    """Option analytics requested at zero time to maturity or zero volatility."""


class DegenerateHorizon(VarReinsError):
    """A time-dependent kernel was requested at the terminal date."""


class Infeasible(VarReinsError):
    """The guarantee cannot be met with the available budget."""


class NoConvergence(VarReinsError):
    """A root search exhausted its bracket or iteration budget."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


class ZeroPrice(VarReinsError):
    """Units requested for an asset with non-positive price."""


class ZeroDenominator(VarReinsError):
    """A ratio statistic has a vanishing denominator."""


class ConfigError(VarReinsError):
    """Base class for command-line / config-file problems."""


class UnknownKey(ConfigError):
    pass


class ParseError(ConfigError):
    pass


class InvariantViolation(ConfigError, ValueError):
    """A parameter violates a documented domain invariant."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
