"""Exception types shared by every stage of the pipeline."""


class TapeloopError(Exception):
    """Base class for all package errors."""


class ParseError(TapeloopError):
    """Malformed machine or weights document."""


class ValidationError(TapeloopError):
    """Machine definition violates a structural invariant."""


class PreconditionError(TapeloopError):
    """An operation was called outside its contract."""


class HeadUnderflow(TapeloopError):
    """A Left move would push the tape head off the left edge."""


class EmptyQueue(TapeloopError):
    """A Post machine step was attempted on an empty queue."""


class StepLimitExceeded(TapeloopError):
    """Run exceeded its explicit step budget.

    Carries whatever partial results the caller may still want (for
    example the memory meter of an intentionally truncated generation).
    """

    def __init__(self, message, *, meter=None, stats=None):
        super().__init__(message)
        self.meter = meter
        self.stats = stats


class SpaceLimitExceeded(TapeloopError):
    """Run exceeded its explicit space budget."""


class InputTooLong(TapeloopError):
    """Input does not fit in the declared queue or window."""


class NotAtCheckpoint(TapeloopError):
    """Queue-machine configuration has no defined tape decoding."""


class NotAdapted(TapeloopError):
    """Operation requires a strict dequeue-1/enqueue-1 Post machine."""


class OffsetOutOfWindow(TapeloopError):
    """Relative position lies outside [0, window)."""


class SynthesisOverflow(TapeloopError):
    """Feed-forward network synthesis would exceed the hidden-width cap."""


class FlagOutOfRange(TapeloopError):
    """Attention flag coordinate outside the two legal branch values."""


class AmbiguousArgmax(TapeloopError):
    """Output logits have a tied maximum."""


class NoAnswerSymbol(TapeloopError):
    """Generation halted on a token that does not carry an answer."""
