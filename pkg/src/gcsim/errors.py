"""Exception hierarchy shared by all modules."""


class GcsimError(Exception):
    """Base class for package errors."""


class ParameterError(GcsimError, ValueError):
    """A physical or numerical parameter is outside its valid domain."""


class DataError(GcsimError, ValueError):
    """Input data violates a structural requirement (e.g. unsorted tags)."""


class NormalizationError(GcsimError, ValueError):
    """A histogram cannot be normalized (zero rates, too few side peaks)."""


class FitError(GcsimError, RuntimeError):
    """Least-squares fit failed in a way that cannot be flagged and returned."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(GcsimError, ValueError):
    """Experiment configuration failed validation; ``path`` locates the field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class FormatError(GcsimError, ValueError):
    """Malformed tag file or CSV."""
