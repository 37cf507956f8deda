"""Exception and warning types shared across the package."""


class IsmError(Exception):
    """Base class for all errors raised by ism_haptics."""


class InvalidArgument(IsmError, ValueError):
    """A value violates an operation's preconditions."""


class WavError(IsmError):
    """Base class for WAV decoding failures."""


class WavNotFound(WavError, FileNotFoundError):
    pass


class MalformedWav(WavError):
    pass


class UnsupportedWav(WavError):
    pass


class ClipError(IsmError):
    """Base class for haptic clip parse/validation failures."""


class ClipSyntaxError(ClipError):
    """The clip file is not well-formed JSON."""

    def __init__(self, msg, line=None, column=None):
        if line is not None:
            msg = f"line {line}, column {column}: {msg}"
        super().__init__(msg)
        self.line = line
        self.column = column


class ClipSchemaError(ClipError):
    """A field is missing or has the wrong type."""

    def __init__(self, field, msg):
        super().__init__(f"{field}: {msg}")
        self.field = field


class ClipInvariantError(ClipError):
    """The clip content breaks an ordering or range invariant."""

    def __init__(self, field, msg, index=None):
        where = field if index is None else f"{field}[{index}]"
        super().__init__(f"{where}: {msg}")
        self.field = field
        self.index = index


class DownmixWarning(UserWarning):
    pass


class ClippingWarning(UserWarning):
    pass


class SimplificationWarning(UserWarning):
    pass
