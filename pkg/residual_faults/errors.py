"""
Exception hierarchy for the residual fault toolkit.

Input errors subclass ValueError so callers that only know the standard
library still catch them; the CLI maps them to exit code 1.
"""


class ResidualFaultsError(Exception):
    """Base class for every error raised by this package."""


class InputError(ResidualFaultsError, ValueError):
    """Invalid or unreadable input supplied by the user."""


class RepositoryError(InputError):
    """The repository path is missing, unreadable or not a git repository."""


class IssueEvidenceError(InputError):
    """An issue record cannot be turned into evidence (e.g. no creation time)."""


class UnparseableSourceError(InputError):
    """A Python file could not be parsed even partially."""


class SchemaMismatchError(InputError):
    """Feature columns do not match the schema a model was trained on."""


class SingularCovarianceError(InputError):
    """A within-set covariance matrix is singular and no ridge was given."""


class DuplicateKeyError(InputError):
    """Rows that must be unique by key collide."""

    def __init__(self, duplicates):
        self.duplicates = list(duplicates)
        preview = ", ".join(str(d) for d in self.duplicates[:10])
        more = "" if len(self.duplicates) <= 10 else f" (+{len(self.duplicates) - 10} more)"
        super().__init__(f"duplicate keys: {preview}{more}")


class LeakageError(ResidualFaultsError):
    """A commit appears in more than one split."""
