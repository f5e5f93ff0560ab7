"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: configuration problems exit with 1,
data problems with 2 and numeric failures with 3.
"""


class NHPromptError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(NHPromptError, ValueError):
    """Invalid experiment configuration."""


class DataError(NHPromptError, ValueError):
    """Input data that violates a structural requirement."""


class GraphFormatError(DataError):
    """Malformed canonical graph file.

    Parameters
    ----------
    message : str
        What went wrong.
    line : int, optional
        1-based line number of the offending line.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UndefinedRatioError(DataError):
    """A homophily ratio was requested where its denominator is zero."""


class InsufficientDataError(DataError):
    """Not enough instances to build a task (few-shot or contrastive)."""


class NumericalError(NHPromptError, ArithmeticError):
    """Non-finite values or other numeric failures."""


class ShapeError(NHPromptError, ValueError):
    """Operand shapes are incompatible."""


class FreezeViolationError(NHPromptError, RuntimeError):
    """Attempt to modify or differentiate frozen parameters."""


class KernelUnsupportedError(NHPromptError, ValueError):
    """Similarity kernel cannot be used for the requested loss."""
