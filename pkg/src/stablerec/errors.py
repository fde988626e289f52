"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Malformed arguments: wrong shapes, non-finite entries, bad parameters."""


class DomainError(ValueError):
    """Quantity requested outside the set where it is defined."""


class ResourceError(RuntimeError):
    """A dense materialization would exceed the configured budget."""


class NoCertificateError(RuntimeError):
    """The dual certificate system is infeasible (x0 is not a minimizer)."""


class SolverFailure(RuntimeError):
    """An iterative or pivoting solver could not produce a trustworthy answer."""
