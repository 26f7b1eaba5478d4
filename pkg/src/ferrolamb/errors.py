"""Exception types shared across the toolkit."""


class FerroLambError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(FerroLambError, ValueError):
    """Invalid or inconsistent configuration / constructor input."""


class ParseError(FerroLambError, ValueError):
    """Malformed input text. ``line`` is 1-based, or None when not applicable."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedFormatError(ParseError):
    """Input is well formed but uses a feature outside the supported subset."""


class ConversionError(FerroLambError, ArithmeticError):
    """Network parameter conversion failed (singular matrix at ``freq``)."""

    def __init__(self, message: str, freq: float | None = None):
        self.freq = freq
        super().__init__(message)


class InsufficientDataError(FerroLambError, ValueError):
    """Too few samples for the requested analysis."""


class ExtractionError(FerroLambError, ValueError):
    """A quantity could not be resolved from the frequency response."""
