"""Exception taxonomy shared across the toolkit.

The CLI maps these onto its exit-code contract: DataError -> 3,
TrainingError -> 4. Everything else is a bug.
"""


class DataError(Exception):
    """Input data is malformed, missing, or inconsistent."""


class ParseError(DataError):
    """A dataset file could not be parsed; message names the line."""


class TrainingError(Exception):
    """A training run cannot proceed (bad data mix, divergence, ...)."""
