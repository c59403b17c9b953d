"""Exception hierarchy shared by every ggplevy module.

Library code raises these; only the CLI maps them to process exit codes.
"""

import math
from typing import Optional

# Log-likelihood / log-density value standing for "probability zero".
LOG_ZERO = -math.inf


class GgpLevyError(Exception):
    """Base class for all ggplevy failures"""
    exit_code = 4


class DomainError(GgpLevyError, ValueError):
    """Raised when an argument lies outside the documented domain"""
    pass


class ConvergenceError(GgpLevyError):
    """Raised when a rejection or series loop exceeds its iteration cap"""
    pass


class QuadratureError(GgpLevyError):
    """Raised when a numerical integral cannot reach its tolerance"""
    pass


class MomentDivergenceError(GgpLevyError):
    """Raised when a requested moment or cumulant is infinite"""
    pass


class RegimeError(GgpLevyError):
    """Raised when an operation is undefined in the current parameter regime"""
    pass


class DimensionError(GgpLevyError, ValueError):
    """Raised on empty or mismatched array inputs"""
    pass


class ConfigError(GgpLevyError):
    """Raised when a run configuration fails validation"""
    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DataError(GgpLevyError):
    """Raised when an input data file cannot be used"""
    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class InvariantError(GgpLevyError):
    """Raised when a computed quantity violates an identity it must satisfy"""
    pass
