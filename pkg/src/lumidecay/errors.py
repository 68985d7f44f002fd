"""Exception hierarchy shared by all lumidecay modules."""

from __future__ import annotations


class LumidecayError(Exception):
    """Base class for every error raised by the package."""


class DomainError(LumidecayError, ValueError):
    """A parameter or argument lies outside the supported domain."""


class ConvergenceError(LumidecayError, ArithmeticError):
    """A numerical procedure could not reach the requested tolerance."""


class QuadratureError(ConvergenceError):
    """Quadrature refinement was exhausted before meeting its tolerance."""


class StepError(LumidecayError, ArithmeticError):
    """An ODE trajectory left its admissible range (step too large)."""


class InsufficientData(LumidecayError, ValueError):
    """Too few samples to identify the requested model."""


class PrecisionError(LumidecayError, ArithmeticError):
    """The certified error bound of an extended-precision value is too large."""


class NonConvergence(LumidecayError, RuntimeWarning):
    """Emitted (as a warning) when a fit returns its best-so-far iterate."""
