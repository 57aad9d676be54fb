"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ArtifactError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(ArtifactError):
    pass


class InvalidSubsystem(ArtifactError):
    pass


class NotHermitian(ArtifactError):
    pass


class NotUnitTrace(ArtifactError):
    pass


class NotPSD(ArtifactError):
    pass


class NotUnitary(ArtifactError):
    pass


class OutOfRange(ArtifactError):
    pass


class ZeroProbabilityEvent(ArtifactError):
    """The retained flag event has (numerically) zero probability."""


class NotSubset(ArtifactError):
    pass


class UnknownContext(ArtifactError):
    pass


class WrongScenario(ArtifactError):
    pass


class IncompatibleModel(ArtifactError):
    """Context tables disagree on an overlap beyond the working tolerance."""


class TooLarge(ArtifactError):
    pass


class ParseError(ArtifactError):
    """Malformed interchange document; carries 1-based line and column."""

    def __init__(self, message: str, line: int, column: int = 1) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ConfigError(ArtifactError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownParameter(ConfigError):
    pass
