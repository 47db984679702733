"""Exception hierarchy. Library code raises these; only the CLI maps them to exit codes."""

from typing import Any, Optional


class RNLSError(Exception):
    """Base class for every error raised by rnls_lab"""


class UsageError(RNLSError, ValueError):
    """Invalid parameters or invocation (CLI exit 2)"""


class RegimeMisuseError(UsageError):
    """Operation requested in a regime where it has no meaning"""


class ProfileDecayError(UsageError):
    """Box too small: the profile has not decayed at the boundary"""


class NumericalFailure(RNLSError, RuntimeError):
    """A numerical procedure failed (CLI exit 3)"""


class ShootingError(NumericalFailure):
    pass


class FlowDivergenceError(NumericalFailure):
    pass


class EigenConvergenceError(NumericalFailure):
    pass


class BlowUpError(NumericalFailure):
    """Time integration produced a non-finite or runaway state"""

    def __init__(self, message: str, last_state: Optional[Any] = None, time: float = 0.0):
        super().__init__(message)
        self.last_state = last_state
        self.time = time
