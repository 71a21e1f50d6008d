"""Exception types shared across the package."""


class DataError(Exception):
    """Input file or array cannot be turned into a valid dataset."""


class NumericalError(Exception):
    """A numerical routine failed or refused to continue (non-convergence,
    degenerate configuration, blow-up)."""
