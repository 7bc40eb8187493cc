"""
Exception hierarchy and CLI exit codes.
"""

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4


class LdpCoreError(Exception):
    """Base class for every error raised by ldp_core."""


class InvalidInputError(LdpCoreError, ValueError):
    """Bad parameters, vertex ids, files or flag combinations."""


class SizeLimitError(InvalidInputError):
    """An exhaustive oracle was asked to run above its size limit."""


class CorruptTranscriptError(InvalidInputError):
    """A transcript or replayed history does not fit the graph or itself."""


class StreamOverflowError(LdpCoreError):
    """A counter received more insertions than its horizon T."""


class ProtocolViolationError(LdpCoreError):
    """A participant broke the round contract (e.g. a missing message)."""


class ProtocolDivergenceError(LdpCoreError):
    """The interaction did not end within max_rounds."""


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(exc, InvalidInputError):
        return EXIT_VALIDATION
    if isinstance(exc, (ProtocolDivergenceError, StreamOverflowError, ProtocolViolationError)):
        return EXIT_DIVERGENCE
    if isinstance(exc, OSError):
        return EXIT_IO
    return 1
