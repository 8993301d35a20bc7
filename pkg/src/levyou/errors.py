"""Exception hierarchy shared by all modules."""


class LevyOUError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(LevyOUError, ValueError):
    pass


class ParameterError(LevyOUError, ValueError):
    pass


class AccuracyError(LevyOUError, RuntimeError):
    """A quadrature did not reach its tolerance.

    The best available estimate is kept on ``estimate`` so callers can
    decide whether it is good enough.
    """

    def __init__(self, message, estimate=None, achieved=None):
        super().__init__(message)
        self.estimate = estimate
        self.achieved = achieved


class SamplingError(LevyOUError, RuntimeError):
    pass


class UnsupportedError(LevyOUError, NotImplementedError):
    pass


class RankConditionError(LevyOUError, ValueError):
    """Raised when an operation needs Rank[B, AB, ..., A^{n-1}B] = n."""


class NonDecayingError(LevyOUError, ValueError):
    """The characteristic function does not decay, so it cannot be inverted."""


class CoverageError(LevyOUError, ValueError):
    pass


class ConditioningError(LevyOUError, ValueError):
    pass


class ConfigError(LevyOUError, ValueError):
    """Invalid experiment configuration; ``path`` points at the bad field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
