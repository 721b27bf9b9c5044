"""Exception types raised across the toolkit."""


class LLControlError(Exception):
    """Base class for toolkit errors."""


class DegenerateMagnetizationError(LLControlError, ValueError):
    pass


class MeshError(LLControlError, ValueError):
    pass


class StepSizeError(LLControlError, ValueError):
    pass


class SemilinearDomainError(LLControlError, ValueError):
    pass


class DegenerateLoopError(LLControlError, ValueError):
    pass


class RateUndefinedError(LLControlError, ValueError):
    pass


class BlowUpError(LLControlError, FloatingPointError):
    """Raised when a state or right-hand side stops being finite."""

    def __init__(self, message, node=None, t=None):
        super().__init__(message)
        self.node = node
        self.t = t


class ConfigError(LLControlError, ValueError):
    """Invalid scenario configuration; ``lineno`` points into the source file."""

    def __init__(self, message, lineno=None, field=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
        self.field = field
