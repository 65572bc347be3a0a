"""Exception taxonomy for the extraction bridge."""

from __future__ import annotations


class BridgeError(Exception):
    """Base class for every error this package raises on purpose."""


class ManifestError(BridgeError):
    """The corpus manifest is missing, malformed, or inconsistent."""


class CheckpointError(BridgeError):
    """The encoder checkpoint cannot be loaded or does not fit the request."""


class MediaError(BridgeError):
    """A single utterance's media or alignment cannot be processed."""
