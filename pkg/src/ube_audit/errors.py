"""Exception taxonomy shared across the package.

Grouping matters for the CLI exit codes: configuration problems exit 2,
unreadable or malformed input files exit 3, everything else exits 4.
"""


class UbeAuditError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(UbeAuditError):
    """A parameter value is outside its documented domain."""


class FormatError(UbeAuditError):
    """An input file does not follow its declared format.

    ``line`` is the 1-based offending line for text formats, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class TruncatedFile(FormatError):
    """A binary input ended before the declared payload was complete.

    ``byte_offset`` is the absolute offset at which reading stopped.
    """

    def __init__(self, message, byte_offset=None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        Exception.__init__(self, message)
        self.line = None
        self.byte_offset = byte_offset


class IngestError(UbeAuditError):
    """A name dataset is unreadable or missing required columns."""


class UnknownToken(UbeAuditError, KeyError):
    """A requested token is not present in the embedding vocabulary."""

    def __init__(self, token):
        super().__init__(f"token not in vocabulary: {token!r}")
        self.token = token
