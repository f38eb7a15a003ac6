"""Exception hierarchy shared across the package.

Every error raised by library code derives from SocMarketError so callers
(including the CLI) can map failures to a single machine-parseable class
name.
"""


class SocMarketError(Exception):
    """Base class for all socmarket errors."""


class ConfigurationError(SocMarketError):
    """Invalid lattice or run configuration."""


class InputError(SocMarketError):
    """Input data violates a precondition (empty trace, bad window, ...)."""


class ComputationError(SocMarketError):
    """A numeric guard tripped (overflow, nonpositive variance, ...)."""


class FitError(SocMarketError):
    """Not enough usable data for a fit, or a degenerate fit result."""


class ParseError(SocMarketError):
    """A data file row could not be parsed; message carries the location."""


class ValidationError(SocMarketError):
    """Parsed data violates a consistency rule; message carries the location."""
