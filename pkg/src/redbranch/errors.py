"""Exception hierarchy with stable machine-readable codes.

Every error raised by the library carries a ``code`` attribute so the CLI
can map failures onto its exit-code contract (config errors vs resource
exhaustion vs criterion failures).
"""

from __future__ import annotations


class RedbranchError(Exception):
    """Base class; ``code`` is a stable identifier, not a message."""

    code = "ERROR"


class OutOfRangeError(RedbranchError):
    """A model parameter violates an admissibility bound."""

    code = "OUT_OF_RANGE"


class DomainError(RedbranchError):
    """A function argument lies outside its mathematical domain."""

    code = "DOMAIN"


class RangeError(RedbranchError):
    """A query exceeds the built table horizon or index ordering."""

    code = "RANGE"


class RegimeError(RedbranchError):
    """Operation called for parameters in the wrong asymptotic regime."""

    code = "REGIME"


class CapacityError(RedbranchError):
    """A configured memory or population budget would be exceeded."""

    code = "CAPACITY"


class NoConvergenceError(RedbranchError):
    """An iterative solver hit its iteration or step floor."""

    code = "NO_CONVERGENCE"


class ExhaustedError(RedbranchError):
    """Rejection sampling used up its attempt budget."""

    code = "EXHAUSTED"


class ConfigError(RedbranchError):
    """An experiment configuration is invalid."""

    code = "CONFIG_INVALID"
