"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class SGGError(Exception):
    """Base class for every error raised by the package."""


class DomainError(SGGError, ValueError):
    """An input lies outside the domain where the operation is defined."""


class ConstructionError(SGGError):
    """No admissible traveling wave exists for the requested parameters."""


class ConfigError(SGGError, ValueError):
    """Invalid configuration text.

    ``lineno`` is set for syntax errors; semantic errors leave it ``None``.
    """

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class NoCrossing(SGGError):
    """The requested level is not attained by the field."""


class InsufficientData(SGGError):
    """Too few samples for a fit."""


class BreakdownError(SGGError):
    """Raised by :func:`sgg.solver.step` when the state stops being admissible."""

    def __init__(self, cause: str, location: int, t: float):
        self.cause = cause
        self.location = location
        self.t = t
        super().__init__(f"{cause} at cell {location}, t={t:.6g}")
