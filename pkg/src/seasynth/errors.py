"""Exception types shared across the toolkit."""


class SeasynthError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SeasynthError, ValueError):
    """A scene, camera or range configuration is invalid."""


class MeshParseError(SeasynthError, ValueError):
    """A mesh file could not be parsed.

    ``line`` holds the 1-based line number of the offending line, or None when
    the error concerns the file as a whole.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EvaluationError(SeasynthError):
    """Metrics cannot be computed from the supplied pairs."""


class GenerationError(SeasynthError):
    """Dataset generation aborted; ``index`` names the failing sample."""

    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)
