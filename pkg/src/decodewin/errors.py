"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class DecodewinError(Exception):
    """Base class for all toolkit errors."""


class FormatError(DecodewinError):
    """A file on disk does not conform to its declared format."""


class ValidationError(DecodewinError):
    """An in-memory value violates a documented invariant or precondition."""


class ComputationError(DecodewinError):
    """A well-formed input admits no meaningful result."""
