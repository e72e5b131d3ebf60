"""Exception types shared across the package."""


class FlowSegError(Exception):
    """Base class for all flowseg errors."""


class InputError(FlowSegError):
    """An operation was called with inputs that violate its contract."""


class FormatError(FlowSegError):
    """A file does not conform to its documented binary format."""


class ConfigError(FlowSegError):
    """A configuration file or key is malformed or missing."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class MetricError(FlowSegError):
    """An evaluation metric was asked to score unusable inputs."""


class SourceError(FlowSegError):
    """A streaming frame source failed mid-run.

    ``last_window`` is the 1-based number of the last fully processed
    window (0 if the source failed before any window completed).
    """

    def __init__(self, message: str, last_window: int):
        super().__init__(message)
        self.last_window = last_window
