"""
Exceptions for swarmrec
"""

from typing import Optional


class SwarmRecError(Exception):
    """Base exception for all swarmrec errors"""
    pass


class InputError(SwarmRecError):
    """Input data could not be used"""
    pass


class ParseError(InputError):
    """A line of an input file is malformed"""

    def __init__(self, message: str, line_number: Optional[int] = None, path: Optional[str] = None):
        self.line_number = line_number
        self.path = path
        location = ""
        if path is not None:
            location = f"{path}:"
        if line_number is not None:
            location = f"{location}{line_number}: "
        elif location:
            location = f"{location} "
        super().__init__(f"{location}{message}")


class RangeError(InputError):
    """A value lies outside its permitted range"""
    pass


class EmptyInputError(InputError):
    """Input holds no usable records"""
    pass


class ConfigurationError(SwarmRecError):
    """Invalid or inconsistent configuration"""
    pass


class NumericError(SwarmRecError):
    """A computation produced non-finite or otherwise unusable numbers"""
    pass


class ConvergenceError(NumericError):
    """An iterative method did not converge within its budget"""

    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class UndefinedSimilarityError(NumericError):
    """Similarity is undefined for the given operands"""
    pass


class DomainError(SwarmRecError):
    """Point outside the domain of a benchmark objective"""
    pass


class OracleRefusal(SwarmRecError):
    """A reference oracle refused its input (size cap or precondition)"""
    pass


class StageError(SwarmRecError):
    """A pipeline stage failed"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code"""
    if isinstance(error, StageError):
        return exit_code_for(error.cause)
    if isinstance(error, (InputError, ConfigurationError, DomainError, OracleRefusal)):
        return 1
    if isinstance(error, NumericError):
        return 2
    return 3
