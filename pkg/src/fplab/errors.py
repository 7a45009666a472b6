"""Exception types raised across fplab."""


class FPLabError(Exception):
    pass


class DimensionError(FPLabError, ValueError):
    """A strategy or state does not match the game's shape."""


class ConfigError(FPLabError, ValueError):
    """Invalid configuration; carries the offending field path when known."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class StateCorruptionError(FPLabError):
    pass


class RunAborted(FPLabError):
    """A run hit a non-finite state or broke a runtime invariant."""

    def __init__(self, message, iteration=None, component=None):
        self.iteration = iteration
        self.component = component
        super().__init__(message)


class PresetRefused(FPLabError, ValueError):
    pass


class OracleOutOfRange(FPLabError, ValueError):
    pass
