"""Shared exception types, mapped to CLI exit codes."""


class DataError(Exception):
    """Malformed or inconsistent input data (files, records, keys)."""


class NumericError(Exception):
    """Numeric failure during training or scoring (divergence, non-finite values)."""
