"""Exception types shared across the package."""


class ExamMonError(Exception):
    """Base class for all package errors."""


# landmark geometry

class LandmarkError(ExamMonError):
    """A frame record failed validation."""


class AllZeroLandmarks(LandmarkError):
    """All 478 points are (0, 0): the no-face sentinel."""


class WrongPointCount(LandmarkError):
    """Point list is not exactly 478 (x, y) pairs."""


class OutOfRange(LandmarkError):
    """A coordinate is non-finite or outside [0, 1]."""


class BadMetadata(LandmarkError):
    """Frame width/height are not positive integers."""


class DegenerateDiagonal(LandmarkError):
    """Frame diagonal is zero, negative, or non-finite."""


# classifier

class BadDims(ExamMonError):
    """Layer widths conflict with the feature mode or binary output."""


class DimMismatch(ExamMonError):
    """Feature vector does not match the model's input layer."""


class EmptyDataset(ExamMonError):
    """Operation requires at least one sample."""


class NonFiniteLoss(ExamMonError):
    """Training diverged to NaN/inf loss."""


class IoFailure(ExamMonError):
    """File could not be read or written."""


class CorruptModel(ExamMonError):
    """Model file failed its checksum or shape validation."""


# dataset pipeline

class MalformedRecord(ExamMonError):
    """A dataset line is syntactically unparseable (carries the line number)."""


class EmptyInput(IoFailure):
    """Input file or directory contains no records."""


class InvalidRatio(ExamMonError):
    """Split ratio outside (0, 1)."""


class BadSpec(ExamMonError):
    """Synthetic generator spec violates its invariants."""


# session engine

class SessionEnded(ExamMonError):
    """The session is terminal; no further transitions."""


class InvalidTransition(ExamMonError):
    """Requested action is not legal from the current state."""


class CorruptLog(ExamMonError):
    """Event log has a seq gap/regression or an impossible transition."""


# monitor service

class ModelLoadFailure(ExamMonError):
    """Configured model path could not be loaded."""


class DuplicateRoom(ExamMonError):
    """Room id already registered."""


class UnknownRoom(ExamMonError):
    """No such room."""


class UnknownStudent(ExamMonError):
    """No session for that student in the room."""


class AuthFailure(ExamMonError):
    """Token does not authorize the requested role."""


class StaleSeq(ExamMonError):
    """Frame seq is not strictly greater than the last one seen."""


# load harness

class ConnectFailure(ExamMonError):
    """Server unreachable."""


class BadSchedule(ExamMonError):
    """Behavior schedule is empty or malformed."""
