"""Exception hierarchy shared by every module."""


class FastSlowError(Exception):
    """Base class for all errors raised by fastslow."""


class ConfigurationError(FastSlowError, ValueError):
    """Invalid parameters or an unsupported combination of options."""


class DimensionError(FastSlowError, ValueError):
    """Array shapes do not agree."""


class RangeError(FastSlowError, ValueError):
    """Times out of range or in the wrong order."""


class EvaluationError(FastSlowError, ArithmeticError):
    """A coefficient evaluation produced a non-finite value."""


class BoxExitError(EvaluationError):
    """The state left the box on which coefficient bounds are declared."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DegenerateInputError(FastSlowError, ValueError):
    """Not enough points to evaluate a seminorm."""


class ContractViolation(FastSlowError, ValueError):
    """An operation was called on data outside its contract."""


class FitError(FastSlowError, ValueError):
    """Least-squares rate fit is undetermined."""
