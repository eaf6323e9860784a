"""Exception hierarchy shared by all subpackages."""


class LabError(Exception):
    """Base class for every error raised by the package."""


class NonIntegerRequired(LabError, ValueError):
    pass


class NonPositive(LabError, ValueError):
    pass


class GridTooLarge(LabError):
    pass


class HurstMismatch(LabError, ValueError):
    pass


class OffGrid(LabError, ValueError):
    pass


class InsufficientGrid(LabError, ValueError):
    pass


class NoConvergence(LabError):
    pass


class UnknownName(LabError, KeyError):
    pass


class ConditionViolated(LabError, ValueError):
    pass


class NonTerminating(LabError):
    pass


class ChainTooShallow(LabError, ValueError):
    pass


class DegenerateInput(LabError, ValueError):
    pass


class MaxItersExceeded(LabError):
    """Picard iteration hit its budget; the last state is attached."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
