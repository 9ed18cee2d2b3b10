"""Exceptions raised by the toolkit.

Every error carries the exit code the command line maps it to, so library
code can raise freely and the CLI only has to translate.
"""


class WindXaiError(Exception):

    """Base class for all toolkit errors."""

    exit_code: int = 1


class ConfigurationError(WindXaiError, ValueError):

    """Invalid parameters, flags or configuration documents."""

    exit_code = 1


class DataError(WindXaiError, ValueError):

    """Missing, malformed or insufficient input data."""

    exit_code = 2


class SchemaVersionError(DataError):

    """A saved document uses a format version this build cannot read."""


class NumericalError(WindXaiError, ArithmeticError):

    """Training diverged or a model produced non-finite output."""

    exit_code = 3
