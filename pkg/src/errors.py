"""
Exception hierarchy for rcmlab.

Validation errors map to CLI exit code 2, numerical failures to exit code 3.
"""
from __future__ import annotations

from typing import Optional


class LabError(RuntimeError):
    """Base class for every error raised by the lab."""


class ValidationError(LabError):
    """Bad input: geometry, parameters or configuration."""


class NumericalError(LabError):
    """A computation ran but failed to produce a trustworthy number."""


class InvalidLoop(ValidationError):
    pass


class InvalidParams(ValidationError):
    pass


class InvalidMarks(ValidationError):
    pass


class InvalidQuad(ValidationError):
    pass


class SizeMismatch(ValidationError):
    pass


class CapExceeded(ValidationError):
    """Raised when a domain has too many edges for exhaustive enumeration."""

    def __init__(self, required: int, cap: int, message: Optional[str] = None):
        self.required = required
        self.cap = cap
        super().__init__(message or f"enumeration needs {required} edges, cap is {cap}")


class UnsupportedQ(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class BelowMinimalRadius(ValidationError):
    pass


class InvalidIntervals(ValidationError):
    pass


class NotOnPath(ValidationError):
    pass


class NotInterior(ValidationError):
    pass


class InvalidContour(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class OutOfDomain(ValidationError):
    pass


class NotCentred(ValidationError):
    pass


class GenerationFailed(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class NoConvergence(NumericalError):
    pass


class TraceError(NumericalError):
    pass
