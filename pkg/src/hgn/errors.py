"""Exception taxonomy shared across the package.

ValidationError (and subclasses) map to CLI exit code 1, anything else to 2.
"""


class HGNError(Exception):
    """Base class for all package errors."""


class ValidationError(HGNError):
    """Bad user input: config values, malformed data files, shape mismatches."""


class ShapeError(ValidationError):
    """Operand shapes incompatible with the requested operation."""


class ConfigError(ValidationError):
    """Unparseable or out-of-range run configuration."""


class DataError(ValidationError):
    """Malformed corpus, vocabulary, or checkpoint payload."""


class TrainingAborted(HGNError):
    """Training hit a non-recoverable numeric state (non-finite loss)."""
