"""Exception hierarchy shared by every agielo module.

All errors derive from ``ValueError`` so callers that only care about bad
input can catch the builtin. The CLI maps each subclass to an exit code.
"""


class AgiEloError(ValueError):
    """Base class for all agielo errors."""


class ArgumentError(AgiEloError):
    """Structurally invalid arguments (empty collections, length mismatch)."""


class DomainError(AgiEloError):
    """A numeric value lies outside the domain of an operation."""


class FormatError(AgiEloError):
    """Malformed input data (CSV, config, run JSON)."""
