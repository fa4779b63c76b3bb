"""Exception hierarchy shared across the toolkit.

Every error raised on purpose derives from AuditError so callers (and the
CLI exit-code mapping) can tell deliberate validation failures apart from
genuine I/O trouble.
"""


class AuditError(Exception):
    """Base class for all toolkit errors."""


class ManifestError(AuditError):
    """Malformed manifest content (bad header, bad row, bad value)."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class IntegrityError(AuditError):
    """Dataset-level contradiction: duplicate ids, unknown ids, id clashes."""


class EmbeddingFormatError(AuditError):
    """Embedding file violates its declared format."""


class ConfigError(AuditError):
    """Invalid configuration value or missing required setting."""


class NotFittedError(AuditError):
    """Estimator used before fit() was called."""


class VerdictConflictError(AuditError):
    """A second verdict for the same (pair, annotator) was submitted."""
