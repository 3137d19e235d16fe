"""Exception hierarchy.

Value-style problems subclass ``ValueError`` as well, so callers that only
care about bad input can catch that.
"""


class OptoHeraldError(Exception):
    """Base class for all library errors."""


class InvalidDimensionError(OptoHeraldError, ValueError):
    pass


class TruncationError(OptoHeraldError, ValueError):
    def __init__(self, message, required_dim=None):
        super().__init__(message)
        self.required_dim = required_dim


class DomainError(OptoHeraldError, ValueError):
    pass


class ShapeError(OptoHeraldError, ValueError):
    pass


class ZeroLikelihoodError(OptoHeraldError, ValueError):
    """The herald cannot fire: Tr[P^dag P rho] vanishes."""


class UndefinedQError(OptoHeraldError, ValueError):
    """Mandel Q requested for a state with (numerically) zero mean occupation."""


class DegenerateError(OptoHeraldError, ValueError):
    pass


class RegimeError(OptoHeraldError):
    """A physical approximation is violated badly enough that no result is returned."""


class RegimeWarning(UserWarning):
    """A physical approximation (adiabatic, resolved sideband, short pulse...) is stretched."""


class ConvergenceError(OptoHeraldError, ArithmeticError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NoSolutionError(OptoHeraldError, ValueError):
    def __init__(self, message, mismatch=None, nearest=None):
        super().__init__(message)
        self.mismatch = mismatch
        self.nearest = nearest


class ConfigError(OptoHeraldError, ValueError):
    pass
