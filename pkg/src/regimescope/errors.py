"""Domain error types.

Every error carries a stable machine-readable ``code`` so the CLI and the
HTTP service can surface them uniformly.
"""

from __future__ import annotations


class RegimescopeError(Exception):
    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


class EmptyDataError(RegimescopeError):
    code = "EmptyData"


class BadTickError(RegimescopeError):
    code = "BadTick"

    def __init__(self, index: int, message: str = ""):
        super().__init__(message or f"bad tick at index {index}")
        self.index = index


class TooShortError(RegimescopeError):
    code = "TooShort"


class BadValueError(RegimescopeError):
    code = "BadValue"

    def __init__(self, index: int, message: str = ""):
        super().__init__(message or f"bad value at index {index}")
        self.index = index


class BadInputError(RegimescopeError):
    """Malformed external input (CSV shape, unknown model name, bad config)."""

    code = "BadInput"


class BadIntervalError(RegimescopeError):
    code = "BadInterval"


class DegenerateVarianceError(RegimescopeError):
    code = "DegenerateVariance"


class DegenerateIntervalError(RegimescopeError):
    code = "DegenerateInterval"


class BadEditError(RegimescopeError):
    code = "BadEdit"


class IncompatibleError(RegimescopeError):
    code = "Incompatible"


class TooFewSegmentsError(RegimescopeError):
    code = "TooFewSegments"


class BadKError(RegimescopeError):
    code = "BadK"


class VersionConflictError(RegimescopeError):
    """Optimistic-concurrency failure on a session mutation."""

    code = "VersionConflict"


class UnknownSessionError(RegimescopeError):
    code = "UnknownSession"
