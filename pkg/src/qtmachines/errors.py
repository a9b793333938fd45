"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of an operation (bad shape, temperature, ...)."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to produce a trustworthy result."""


class IntegrationError(NumericalError):
    """Time integration drifted out of the physical state space."""


class ConvergenceError(NumericalError):
    """An iterative procedure hit its cap without converging."""


class TruncationError(DomainError):
    """Fock-space truncation too small for the requested state."""
