"""Exception types shared across the engine.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
anything else -> 3.
"""


class ActInferError(Exception):
    """Base class for engine errors."""


class DataError(ActInferError):
    """Malformed, inconsistent, or missing input data."""


class UsageError(ActInferError):
    """Invalid invocation: bad flags, modes, or parameter combinations."""


class TrainingError(ActInferError):
    """Numerical failure during map training (diverging loss)."""
