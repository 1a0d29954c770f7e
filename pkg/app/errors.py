"""
Domain exceptions shared by every service.

Each class carries the process exit code the CLI maps it to:
1 usage, 2 data, 3 numerical failure.
"""
from typing import Optional


class PopfError(Exception):
    exit_code = 3


# ----------------------------------------------------------
# Usage
# ----------------------------------------------------------

class UsageError(PopfError):
    exit_code = 1


# ----------------------------------------------------------
# Data problems (bad files, bad inputs)
# ----------------------------------------------------------

class DataError(PopfError):
    exit_code = 2


class CaseParseError(DataError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CaseValidationError(DataError):
    pass


class WindDataError(DataError):
    pass


class ArtifactError(DataError):
    pass


class ConfigError(DataError):
    pass


class MissingReferenceError(DataError):
    pass


class DimensionError(DataError):
    pass


# ----------------------------------------------------------
# Numerical failures
# ----------------------------------------------------------

class NumericalError(PopfError):
    exit_code = 3


class SingularJacobianError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class DegenerateDataError(NumericalError):
    pass


class CholeskyError(NumericalError):
    pass


class StreamExhaustedError(NumericalError):
    pass


class ZeroDensityError(NumericalError):
    pass


class InfeasibleBudgetError(NumericalError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ZeroReferenceError(NumericalError):
    pass
