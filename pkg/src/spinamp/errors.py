"""Exception hierarchy.

Errors split into configuration problems (bad input, exit code 2 in the CLI)
and numerical failures (exit code 3).
"""


class SpinAmpError(Exception):
    """Base class for all package errors."""


class ConfigError(SpinAmpError, ValueError):
    """Invalid or unknown parameters."""


class SizeLimitError(ConfigError):
    """A request exceeds a documented size cap."""


class BoundaryTouchError(SpinAmpError):
    """A reachable configuration touched the far edge of a finite grid."""


class InsufficientDataError(SpinAmpError, ValueError):
    """Too few points to perform a fit."""


class NumericalError(SpinAmpError, ArithmeticError):
    """Base class for numerical failures."""


class NumericalBreakdownError(NumericalError):
    """Loss of orthogonality or another breakdown in an iterative method."""


class IntegratorError(NumericalError):
    """An ODE integration failed to meet its tolerance.

    Attributes
    ----------
    last_time : float
        The last time at which the state was known to be accurate.
    """

    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last good time {last_time:g})")
        self.last_time = last_time
