"""Exception types raised by compobs."""


class CompobsError(ValueError):
    """Base class for all compobs errors."""


class InvalidDimensionError(CompobsError):
    pass


class InvalidParameterError(CompobsError):
    pass


class ModelMismatchError(CompobsError):
    """The matrix does not have the structure an operation requires."""


class ShapeMismatchError(CompobsError):
    pass


class UndefinedStatisticError(CompobsError):
    """A ratio statistic was requested for the zero vector."""


class InstanceTooLargeError(CompobsError):
    pass


class ConfigError(CompobsError):
    pass
