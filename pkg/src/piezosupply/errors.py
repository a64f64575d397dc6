"""Exception types shared by the data-facing modules."""


class DataError(Exception):
    """Malformed user-supplied data (config files, CSV)."""


class NumericError(Exception):
    """A numerical procedure failed to produce a trustworthy result."""
