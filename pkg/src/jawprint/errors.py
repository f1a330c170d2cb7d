"""Exception hierarchy shared across the toolkit.

Every error raised on a documented failure path derives from JawprintError so
callers (CLI, service) can map them to exit codes / HTTP statuses uniformly.
"""

from __future__ import annotations


class JawprintError(Exception):
    """Base class for all toolkit errors."""


# --- ingestion -------------------------------------------------------------

class MissingFile(JawprintError):
    pass


class MalformedRow(JawprintError):
    def __init__(self, line: int, detail: str = ""):
        self.line = line
        super().__init__(f"malformed row at data line {line}" + (f": {detail}" if detail else ""))


class NonMonotoneTimestamp(JawprintError):
    def __init__(self, line: int):
        self.line = line
        super().__init__(f"timestamp not strictly increasing at data line {line}")


class StreamTooShort(JawprintError):
    pass


class MissingSession(JawprintError):
    pass


# --- features --------------------------------------------------------------

class SeriesTooShort(JawprintError):
    pass


class MissingLocation(JawprintError):
    pass


class EmptyMatrix(JawprintError):
    pass


class DegenerateClass(JawprintError):
    pass


class KTooLarge(JawprintError):
    pass


# --- verifiers -------------------------------------------------------------

class SingleClass(JawprintError):
    pass


class NonConvergence(JawprintError):
    def __init__(self, max_iterations: int):
        self.max_iterations = max_iterations
        super().__init__(f"solver did not converge within {max_iterations} iterations")


class DimensionMismatch(JawprintError):
    pass


class ShapeMismatch(JawprintError):
    pass


class CorruptModelFile(JawprintError):
    pass


class VersionMismatch(JawprintError):
    pass


# --- evaluation ------------------------------------------------------------

class NotEnoughImpostors(JawprintError):
    pass


class EmptyScores(JawprintError):
    pass


# --- video attack ----------------------------------------------------------

class TooFewFrames(JawprintError):
    pass


class NonIntegerDecimation(JawprintError):
    pass


class UpscalingRejected(JawprintError):
    pass


# --- service ---------------------------------------------------------------

class UnknownUser(JawprintError):
    pass


class SessionNotFound(JawprintError):
    pass


class SessionNotActive(JawprintError):
    pass


class InvalidTransition(JawprintError):
    pass


class UnknownLocation(JawprintError):
    pass
