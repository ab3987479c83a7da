"""Shared exception type for contract violations across the toolkit."""


class VtError(Exception):
    """Raised for invalid inputs, malformed files, and broken invariants.

    The CLI treats any VtError as a user-facing failure (nonzero exit,
    message on stderr), so messages should name the offending value.
    """
