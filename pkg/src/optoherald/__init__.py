"""Heralded nonclassical states of a highly displaced mechanical oscillator.

Truncated Fock-space simulation of single-photon heralding in cavity
optomechanics, the closed-form Mandel Q predictions that go with it, the
pulsed and continuous-wave drive models, and a CLI for reproducible sweeps.
"""

__version__ = "0.1.0"

from .policy import NumericPolicy, DEFAULT_POLICY
from .errors import (
    OptoHeraldError,
    InvalidDimensionError,
    TruncationError,
    DomainError,
    ShapeError,
    ZeroLikelihoodError,
    UndefinedQError,
    DegenerateError,
    RegimeError,
    RegimeWarning,
    ConvergenceError,
    NoSolutionError,
    ConfigError,
)

__all__ = [
    "__version__",
    "NumericPolicy",
    "DEFAULT_POLICY",
    "OptoHeraldError",
    "InvalidDimensionError",
    "TruncationError",
    "DomainError",
    "ShapeError",
    "ZeroLikelihoodError",
    "UndefinedQError",
    "DegenerateError",
    "RegimeError",
    "RegimeWarning",
    "ConvergenceError",
    "NoSolutionError",
    "ConfigError",
]
