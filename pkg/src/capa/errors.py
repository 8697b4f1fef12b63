"""Exception hierarchy shared by all modules."""


class CapaError(Exception):
    """Base class for library errors."""


class UsageError(CapaError, ValueError):
    """Invalid arguments, wrong aperture variant or malformed configuration."""


class DomainError(CapaError, ValueError):
    """Input outside the mathematical domain of a formula (singular kernel, ...)."""


class ConvergenceError(CapaError, ArithmeticError):
    """Quadrature failed to reach the requested tolerance.

    ``estimates`` holds the last two whole-integral estimates (either may be
    ``None`` if the refinement stopped before producing it).
    """

    def __init__(self, message, estimates=(None, None)):
        super().__init__(message)
        self.estimates = tuple(estimates)
