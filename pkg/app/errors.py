"""
Exceptions raised by the mCD toolkit. The CLI maps MCDError to exit status 1.
"""
from typing import Optional


class MCDError(Exception):
    """Base class for every error the toolkit raises on purpose"""


class ParseError(MCDError):
    """Malformed input line"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphLoadError(MCDError):
    """Edge list violates a graph invariant (e.g. a self-loop)"""


class DomainError(MCDError, ValueError):
    """Argument outside the domain of an operation"""


class SplitError(MCDError):
    pass


class ConfigError(MCDError):
    pass


class ContractViolation(MCDError):
    """Caller broke an operation's precondition on seed-set state"""


class EnumerationLimitError(MCDError):
    """Exhaustive search refused because it would exceed the enumeration limit"""
