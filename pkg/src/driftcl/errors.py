"""Exception hierarchy shared by every layer of the engine."""


class DriftCLError(Exception):
    """Base class for all engine errors."""


class ConfigurationError(DriftCLError, ValueError):
    pass


class DataError(DriftCLError, ValueError):
    pass


class NumericError(DriftCLError, ArithmeticError):
    pass


class StrategyError(DriftCLError):
    pass


class EvaluationError(DriftCLError, ValueError):
    pass
