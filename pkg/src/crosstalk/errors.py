"""Exception hierarchy.

Every failure mode that callers are expected to catch has its own class;
the CLI maps them onto exit codes (data/format errors -> 2, numeric
failures -> 3).
"""


class CrosstalkError(Exception):
    """Base class for all library errors."""


# --- audio ---------------------------------------------------------------

class NotMono(CrosstalkError):
    pass


class BadSampleRate(CrosstalkError):
    pass


class BadEncoding(CrosstalkError):
    pass


class Truncated(CrosstalkError):
    pass


class OutOfRangePitch(CrosstalkError):
    pass


class RateMismatch(CrosstalkError):
    pass


class OffsetBeyondFirstSource(CrosstalkError):
    pass


# --- features / files ----------------------------------------------------

class TooShort(CrosstalkError):
    pass


class BadMagic(CrosstalkError):
    pass


class VersionUnsupported(CrosstalkError):
    pass


class SizeMismatch(CrosstalkError):
    pass


class WrongHop(CrosstalkError):
    pass


# --- neural ---------------------------------------------------------------

class DimMismatch(CrosstalkError):
    pass


class EmptySequence(CrosstalkError):
    pass


class EmptyDataset(CrosstalkError):
    pass


class NonFiniteLoss(CrosstalkError):
    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class ArchMismatch(CrosstalkError):
    pass


class ChecksumFailed(CrosstalkError):
    pass


# --- labels / evaluation --------------------------------------------------

class LengthMismatch(CrosstalkError):
    pass


class BadAlphabet(CrosstalkError):
    pass


class EmptyInput(CrosstalkError):
    pass


# --- corpus ---------------------------------------------------------------

class ParseError(CrosstalkError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class NegativeDuration(CrosstalkError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class UnknownGenderInGenderMode(CrosstalkError):
    pass


class InsufficientSpeakers(CrosstalkError):
    pass


class InsufficientSegments(CrosstalkError):
    pass


class IoError(CrosstalkError):
    pass
