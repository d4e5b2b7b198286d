"""Exception types shared across the package."""

from __future__ import annotations


class BflowError(Exception):
    """Base class for every error raised by this package."""


class CapacityError(BflowError):
    """A requested truncation order exceeds the configured cap.

    The cap defaults to 8 and can be raised through the BF_MAX_ORDER
    environment variable.
    """


class DomainError(BflowError):
    """Structurally valid input that lies outside an operation's domain."""


class ConvergenceError(DomainError):
    """A fixed-point solve failed to reach the requested tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class ParseError(BflowError):
    """Malformed serialized input; carries the offending position."""

    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.text = text
        self.pos = pos
