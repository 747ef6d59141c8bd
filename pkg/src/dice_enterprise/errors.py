"""Exception hierarchy.

Each class carries the CLI exit code it maps to: 2 for parse/config
problems, 3 for pipeline failures, 4 for exhausted caps.
"""


class DiceEnterpriseError(Exception):
    exit_code = 3


class ParseError(DiceEnterpriseError, ValueError):
    """Syntax error in an expression. `offset` is the byte offset of the failure."""

    exit_code = 2

    def __init__(self, message, offset=None, text=None):
        self.offset = offset
        self.text = text
        if offset is not None:
            message = f"{message} at offset {offset}"
        super().__init__(message)


class UnknownIdentifier(ParseError):
    pass


class ConfigError(DiceEnterpriseError, ValueError):
    exit_code = 2


class EvaluationError(DiceEnterpriseError, ArithmeticError):
    pass


class PolyaExhausted(DiceEnterpriseError):
    pass


class NormalizationError(DiceEnterpriseError):
    pass


class GridRootError(DiceEnterpriseError):
    """The common denominator is not positive on the validation grid."""


class NotApplicable(DiceEnterpriseError):
    pass


class CapExceeded(DiceEnterpriseError):
    exit_code = 4


class IterationCapExceeded(CapExceeded):
    pass


class NonterminationError(CapExceeded):
    pass
