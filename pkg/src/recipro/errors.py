"""Exception hierarchy shared by every recipro stage.

Exit-code mapping (used by the CLI): usage/configuration problems exit 1,
data-contract violations exit 2, anything unexpected exits 3.
"""


class ReciproError(Exception):
    """Base class for all recipro errors."""

    exit_code = 3


class UsageError(ReciproError):
    """Invalid configuration, CLI arguments, or stale upstream artifacts."""

    exit_code = 1


class DataError(ReciproError):
    """Input data violates a documented contract (bad file, leaky split, ...)."""

    exit_code = 2
