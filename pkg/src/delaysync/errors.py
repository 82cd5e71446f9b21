"""Exception hierarchy shared by the library and the CLI."""


class DelaySyncError(Exception):
    """Base class for all errors raised by delaysync."""

    exit_code = 1


class InvalidInputError(DelaySyncError, ValueError):
    """An argument is outside the accepted domain."""

    exit_code = 2


class ConfigError(InvalidInputError):
    """The experiment configuration file is malformed or inconsistent."""

    exit_code = 2


class PreconditionError(DelaySyncError):
    """The inputs are well formed but the analysis does not apply to them."""

    exit_code = 3


class NumericalError(DelaySyncError):
    """A numerical procedure could not deliver a trustworthy result."""

    exit_code = 4
