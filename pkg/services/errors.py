"""
Error types raised by frameprobe services.

All errors derive from ValueError so callers can keep catching ValueError
the same way the settings getters and loaders are handled.
"""

from typing import List, Optional, Tuple


class FrameError(ValueError):
    """Base class for frame and corpus errors."""


class EmptyInput(FrameError):
    """Raised when a frame string is empty after trimming."""


class MalformedBracketToken(FrameError):
    """Raised for an open-bracket token with an empty or illegal label."""

    def __init__(self, token: str, index: int, reason: str):
        self.token = token
        self.index = index
        self.reason = reason
        super().__init__(f"Malformed bracket token '{token}' at index {index}: {reason}")


class NotSchemaValid(FrameError):
    """Raised when a token sequence violates the frame tree constraints."""

    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"Frame is not schema-valid at token {index}: {reason}")


class MissingBucketKey(FrameError):
    """Raised when a record lacks the metadata named by bucket_by."""


class MarkerMismatch(FrameError):
    """Raised when span markers in a struct snippet do not match the spans."""


class EmptyCorpus(FrameError):
    """Raised when an ontology is scanned from zero frames."""


class TypeNotApplicable(FrameError):
    """Raised when a frame cannot host the requested injected error."""


class ProbLengthMismatch(FrameError):
    """Raised when token_probs does not align with the predicted tokens."""


class SingleClassCorpus(FrameError):
    """Raised when training data contains only one class."""


class InsufficientRecords(FrameError):
    """Raised when training data has fewer records than the minimum."""


class DegenerateFeatures(FrameError):
    """Raised when every active feature is constant on the training split."""


class MaskMismatch(FrameError):
    """Raised when a feature vector's mask differs from the model's."""


class UnreadableFile(FrameError):
    """Raised when an input file is missing, not a file, or not UTF-8."""


class ParseFailure(FrameError):
    """A single malformed input line."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"Line {line_number}: {reason}")


class EmptyDataset(FrameError):
    """Raised when a file yields no usable records."""

    def __init__(self, path: str, failures: Optional[List[ParseFailure]] = None):
        self.path = path
        self.failures: Tuple[ParseFailure, ...] = tuple(failures or ())
        message = f"No usable records in {path}"
        if self.failures:
            message += f" ({len(self.failures)} malformed line(s), first: {self.failures[0]})"
        super().__init__(message)
