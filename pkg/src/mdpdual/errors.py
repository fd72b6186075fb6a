"""Exception hierarchy shared across the package."""


class MDPError(Exception):
    """Base class for every error raised by mdpdual."""


class ValidationError(MDPError, ValueError):
    pass


class NonStochasticRow(ValidationError):
    pass


class NegativeProbability(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ShapeMismatch(MDPError, ValueError):
    pass


class MultichainError(MDPError):
    """The induced chain has more than one recurrent class."""


class NonConvergence(MDPError):
    pass


class SingularSystem(MDPError):
    pass


class TooLarge(MDPError):
    pass


class IterationLimit(MDPError):
    """A solver ran out of iterations; ``partial`` holds whatever was computed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NotOptimal(MDPError):
    pass


class SupportViolation(MDPError, ValueError):
    pass


class NoAscentDirection(MDPError):
    pass


class LineSearchFailed(MDPError):
    pass


class NumericalInconsistency(MDPError):
    pass


class MaxIterExceeded(MDPError):
    def __init__(self, message, x=None, residual=None):
        super().__init__(message)
        self.x = x
        self.residual = residual


class GenerationFailed(MDPError):
    pass


class BisectionBracketFailure(MDPError):
    pass
