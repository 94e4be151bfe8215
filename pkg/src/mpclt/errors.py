"""Exception hierarchy shared by all modules."""


class MPCLTError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MPCLTError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class SingularityError(MPCLTError, ArithmeticError):
    """A formula hit a pole or a removable-looking zero that is not removable."""


class QuadratureError(MPCLTError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class BranchError(MPCLTError, RuntimeError):
    """A logarithm or argument jumped across a branch cut along a path."""
