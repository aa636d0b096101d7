"""Exception types shared across the package."""


class PositivityError(ValueError):
    """A conformal factor (or a base of a fractional power) is not positive."""


class PreconditionError(ValueError):
    """An input violates a documented precondition of an operation."""


class OrthogonalityError(PreconditionError):
    """The cos^3 orthogonality moments of an alpha = 1 factor do not vanish."""

    def __init__(self, message, moments=None):
        super().__init__(message)
        self.moments = moments


class ConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BlowUpError(RuntimeError):
    """Time stepping could not keep the factor positive even with tiny steps."""

    def __init__(self, message, t=None, dt=None):
        super().__init__(message)
        self.t = t
        self.dt = dt


class InsufficientDecayError(ValueError):
    """A trajectory has too few samples inside the rate-fitting window."""


class ConfigError(ValueError):
    """A run configuration is malformed or semantically invalid."""
