"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class L1RatesError(Exception):
    """Base class for all package errors."""


class ArgumentError(L1RatesError, ValueError):
    """Invalid argument, dimension mismatch or malformed configuration."""


class NumericalError(L1RatesError, ArithmeticError):
    """Non-finite values or a failed numerical procedure."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ConvergenceError(NumericalError):
    """An iterative procedure stopped without meeting its target."""

    def __init__(self, message, bracket=None, iteration=None):
        super().__init__(message, iteration=iteration)
        self.bracket = bracket


class BracketError(ConvergenceError):
    """The initial parameter bracket does not enclose the target band."""


class DegenerateRateError(NumericalError):
    """The rate function vanishes at a positive argument."""


class ApproximationError(NumericalError):
    """A range-approximation step could not reach the requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class InvalidCertificateError(L1RatesError):
    """A source-condition certificate failed its feasibility checks."""

    def __init__(self, message, n=None, xi=None):
        super().__init__(message)
        self.n = n
        self.xi = xi
