"""Exception types shared across the package."""


class SeqlabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(SeqlabError, ValueError):
    """Input data violates a documented invariant."""


class ParseError(SeqlabError, ValueError):
    """A file could not be parsed; carries a 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InfeasibleTargetError(SeqlabError):
    """The target sequence cannot be aligned to the given number of frames.

    Raised instead of returning an infinite loss so callers can skip the
    offending clip explicitly.
    """

    def __init__(self, n_frames, target_len, message=None):
        if message is None:
            message = (f"target of length {target_len} cannot fit in "
                       f"{n_frames} frames")
        super().__init__(message)
        self.n_frames = n_frames
        self.target_len = target_len
