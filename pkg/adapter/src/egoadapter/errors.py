"""Adapter exceptions; the CLI maps them onto exit codes.

UsageError -> 1, DataError -> 2, anything unexpected -> 3,
ModelUnavailable -> 4 (with advice to use stub mode).
"""


class AdapterError(Exception):
    pass


class UsageError(AdapterError):
    pass


class DataError(AdapterError):
    pass


class ModelUnavailable(AdapterError):
    """A vision model could not be imported or loaded."""
