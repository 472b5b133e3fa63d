"""Shared exception and warning types."""


class DataError(ValueError):
    """Input data violates the logit-file contract or a dataset invariant."""


class DataWarning(UserWarning):
    """Non-fatal data-quality notice (e.g. uneven prompt counts, small calibration split)."""
