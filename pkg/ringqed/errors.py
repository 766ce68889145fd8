"""Exception types shared across ringqed.

Hard failures raise; soft conditions (negative Purcell factor from noisy
lifetimes, pile-up, unresolved peaks) are warning flags on the result.
"""

from typing import Optional


class ValidationError(ValueError):
    """An input violates a precondition or a type invariant."""


class SimulationError(RuntimeError):
    """A forward model could not produce a result."""


class FitError(RuntimeError):
    """The fit engine could not produce a result.

    Args:
        reason: Short machine-readable reason, e.g. "degenerate fit".
        message: Optional longer description.
    """

    def __init__(self, reason: str, message: Optional[str] = None):
        super().__init__(message or reason)
        self.reason = reason


class StageError(RuntimeError):
    """A pipeline stage failed; wraps the original error."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"stage '{stage}' failed: {type(error).__name__}: {error}")
        self.stage = stage
        self.error = error
