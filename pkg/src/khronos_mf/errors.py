"""Exception hierarchy shared by all modules.

Each class carries the process exit code used by the command-line tool.
"""


class KhronosError(Exception):
    exit_code = 1


class ConfigurationError(KhronosError, ValueError):
    exit_code = 2


class DataError(KhronosError, ValueError):
    exit_code = 3


class DimensionError(DataError):
    pass


class DomainError(DataError):
    pass


class DegenerateGeometryError(DataError):
    pass


class InsufficientFarfieldError(DataError):
    pass


class InterpolationError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(KhronosError, ArithmeticError):
    exit_code = 4


class TrainingDivergedError(NumericalError):
    def __init__(self, message, epoch=None):
        if epoch is not None:
            message = f"{message} (epoch {epoch})"
        super().__init__(message)
        self.epoch = epoch


class IllConditionedFitError(NumericalError):
    def __init__(self, message, condition=None):
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.condition = condition


class UndefinedVarianceError(NumericalError):
    pass


class DegenerateWeightsError(NumericalError):
    pass
