"""Exception hierarchy shared across the package."""


class RewardsmithError(Exception):
    """Base class for all package errors."""


class DomainError(RewardsmithError, ValueError):
    """A numeric input is outside its mathematical domain (e.g. non-finite)."""


class ConfigError(RewardsmithError, ValueError):
    pass


class InvalidAction(RewardsmithError, ValueError):
    pass


class ParseError(RewardsmithError):
    """Syntax error in a reward program, with 1-based position."""

    def __init__(self, message, line=None, column=None, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        loc = f" at line {line}, column {column}" if line is not None else ""
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message}{loc}{exp}")
        self.message = str(self)


class TypeCheckError(RewardsmithError):
    pass


class RewardRuntimeError(RewardsmithError, ArithmeticError):
    """Evaluation of a reward program failed (division by zero, overflow, ...)."""


class ExtractError(RewardsmithError):
    pass


class EmptyPartition(RewardsmithError, ValueError):
    pass


class TransportError(RewardsmithError):
    pass


class MalformedResponse(RewardsmithError):
    pass


class GenerationExhausted(RewardsmithError):
    def __init__(self, message, attempts=None):
        super().__init__(message)
        self.attempts = attempts or []
