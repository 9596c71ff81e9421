"""Exception types shared across the package."""


class SplitSdeError(Exception):
    """Base class for all package errors."""


class CapacityError(SplitSdeError):
    """Symbolic expansion would exceed the configured truncation-order or word-count cap."""


class ConfigurationError(SplitSdeError):
    """Invalid or inconsistent configuration (missing derivative data, bad tableau, ...)."""


class DomainError(SplitSdeError, ValueError):
    """Mathematically invalid input (divergent integral, negative variance, ...)."""


class InfeasibleError(SplitSdeError):
    """No parameter value satisfies the requested constraint (e.g. no valid cutoff)."""


class NumericalFailure(SplitSdeError):
    """A numerical routine failed to converge or produced non-finite values.

    ``last_state`` carries the last accepted state when one is available.
    """

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class SamplerFailure(SplitSdeError):
    """A rejection sampler exceeded its iteration cap."""
