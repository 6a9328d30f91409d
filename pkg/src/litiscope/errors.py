"""Exception hierarchy and CLI exit codes."""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_TRAIN = 4


class LitiscopeError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(LitiscopeError):
    """Bad configuration file or option value."""

    exit_code = EXIT_USAGE


class CorpusError(LitiscopeError):
    """Malformed or inconsistent corpus data."""

    exit_code = EXIT_DATA


class ModelFileError(LitiscopeError):
    """Missing, corrupt, or version-mismatched model file."""

    exit_code = EXIT_DATA


class TrainingError(LitiscopeError):
    """Model fitting cannot proceed (degenerate classes, bad shapes, ...)."""

    exit_code = EXIT_TRAIN


class ConvergenceError(TrainingError):
    """An iterative solver exhausted its iteration budget."""
