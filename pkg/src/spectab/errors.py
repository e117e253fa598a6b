"""Exception hierarchy shared across the package.

CLI exit codes: usage errors -> 1, :class:`SchemaError` / :class:`DataError`
/ :class:`CheckpointError` -> 2, :class:`TrainingFault` -> 3.
"""


class SpectabError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(SpectabError):
    """Schema file is malformed or inconsistent with the data."""


class DataError(SpectabError):
    """A data file (CSV) cannot be parsed or violates the schema."""


class CheckpointError(SpectabError):
    """Checkpoint file is unreadable, incompatible, or mismatched."""


class TrainingFault(SpectabError):
    """A numerical fault (non-finite loss or gradient) aborted training."""
