"""Exception hierarchy.

Every refusal carries the quantity that failed in ``quantity`` so callers
(and the CLI) can report it.
"""

from __future__ import annotations


class AbelianizerError(Exception):
    """Base class for all library errors."""

    def __init__(self, message: str, **quantity: object) -> None:
        super().__init__(message)
        self.quantity = dict(quantity)


class InvalidArgumentError(AbelianizerError, ValueError):
    pass


class DegenerateError(AbelianizerError, ArithmeticError):
    """Singular matrix, degenerate basis, or no contraction."""


class OrbitTerminatedError(AbelianizerError):
    def __init__(self, message: str, step: int, **quantity: object) -> None:
        super().__init__(message, step=step, **quantity)
        self.step = step


class SaddleConnectionError(InvalidArgumentError):
    """A break orbit returns to a break within the requested depth."""


class UncertifiedError(AbelianizerError):
    """A computation could not certify its own accuracy."""

    stage = "unknown"


class UncertifiedJumpError(UncertifiedError):
    stage = "jump"


class NoCertificateError(UncertifiedError):
    stage = "deviation"


class NotSplitError(UncertifiedError):
    stage = "spectral"
