"""Exception hierarchy shared across the package.

Everything raised on purpose derives from :class:`TaskGuideError` so callers
can catch one base type at process boundaries (the CLI does exactly that).
"""

from __future__ import annotations


class TaskGuideError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TaskGuideError):
    """Invalid or contradictory run configuration."""


class StepAfterDone(TaskGuideError):
    """An environment received step() after the episode finished."""


class MalformedAction(TaskGuideError):
    """Action has the wrong shape for the environment (type, length, range)."""


class LengthMismatch(TaskGuideError):
    """Two words that must have equal length do not."""


class ContradictoryFeedback(TaskGuideError):
    """Accumulated feedback admits no secret word."""


class EmptyCandidateSet(TaskGuideError):
    """Candidate enumeration produced nothing under the current constraints."""


class MalformedRule(TaskGuideError):
    """Rule fails structural validation (unknown comparator, bad window, ...)."""


class UnknownRule(TaskGuideError):
    """Rule id not present in the bank."""


class SchemaVersionMismatch(TaskGuideError):
    """Persisted file carries a version tag this code does not understand."""


class IoFailure(TaskGuideError):
    """Underlying file I/O failed; the OSError is attached as __cause__."""


class BackendUnavailable(TaskGuideError):
    """A completion backend could not produce a response."""


class TransportExhausted(BackendUnavailable):
    """Remote transport failed after the configured number of attempts."""


class ReplayExhausted(TaskGuideError):
    """Replay backend ran out of recorded responses."""


class NoValidAction(TaskGuideError):
    """Fallback generation could not produce any valid action."""


class MissingRun(TaskGuideError):
    """Run directory does not exist or lacks required files."""


class MissingTrajectory(TaskGuideError):
    """Requested trajectory id is not in the log."""


class InsufficientData(TaskGuideError):
    """Statistic requested over too few samples."""
