"""Exception types shared across the package."""


class SketchProjError(Exception):
    """Base class for all library errors."""


class InputError(SketchProjError, ValueError):
    """Malformed or non-finite numerical input."""


class DegenerateInputError(InputError):
    """Structurally valid input that is degenerate (e.g. an all-zero matrix)."""


class ParameterError(InputError):
    """A parameter violates an operation's precondition."""


class CsvParseError(InputError):
    """CSV matrix file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ConfigError(SketchProjError):
    """Invalid experiment configuration."""


class ResourceLimitError(SketchProjError):
    """A configured resource cap would be exceeded."""


class NumericFailure(SketchProjError):
    """Iteration produced a non-finite iterate; carries the last finite state."""

    def __init__(self, message, x=None, trace=None):
        super().__init__(message)
        self.x = x
        self.trace = trace
