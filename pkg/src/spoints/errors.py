"""Exception types shared across the package."""


class SPointError(Exception):
    """Base class for all errors raised by :mod:`spoints`."""


class MalformedInputError(SPointError, ValueError):
    """A potential definition, table or configuration could not be used."""


class ConventionViolatedError(SPointError):
    """The operator ``-Δ + q`` has (numerically) a zero-energy solution.

    Raised when ``I + K`` is singular to within the configured threshold, or
    when the asymptotic slope of a regular radial solution vanishes.
    """

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


class NearNodeError(SPointError, ValueError):
    """Evaluation point too close to a quadrature node carrying potential."""


class NumericalFailure(SPointError, RuntimeError):
    """An iterative refinement did not converge."""
