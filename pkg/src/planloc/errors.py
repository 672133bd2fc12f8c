"""Exception hierarchy shared across the package."""


class PlanlocError(Exception):
    """Base class for all package errors."""


class DomainError(PlanlocError, ValueError):
    """Input outside an operation's documented domain."""


class ConfigurationError(PlanlocError):
    """Inconsistent configuration (pitch mismatch, missing class index...)."""


class FormatError(PlanlocError):
    """Malformed or incompatible serialized artifact."""


class ParseError(FormatError):
    """Malformed OSM XML; carries the byte offset of the failure."""

    def __init__(self, message, byte_offset=None):
        super().__init__(message)
        self.byte_offset = byte_offset


class UnsupportedVersionError(FormatError):
    """Document or file declares a version this code does not support."""


class TransportError(PlanlocError):
    """Network failure that persisted through retries."""


class ThrottledError(TransportError):
    """Server kept rate-limiting the request."""


class DegeneratePriorError(DomainError):
    """Location prior masked out every pose bin."""


class CompatibilityWarning(UserWarning):
    """Loaded artifact was built against a different configuration."""
