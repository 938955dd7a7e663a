"""Exception hierarchy shared across the package.

Every error carries enough context to be rendered as a machine-readable
payload (CLI stderr JSON, HTTP error bodies), so subclasses prefer
structured attributes over formatted-string-only messages.
"""

from __future__ import annotations


class DisparityError(Exception):
    """Base class for all package errors."""

    exit_code = 1

    def payload(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class ConfigurationError(DisparityError):
    """Invalid or missing configuration (weights, seeds, credentials)."""

    exit_code = 2


class SchemaError(DisparityError):
    """Input data does not match the expected schema (columns, dimensions)."""

    exit_code = 3


class IntegrityError(DisparityError):
    """Systemic data problem: duplicate ids, reject rate over threshold."""

    exit_code = 4


class RowError(DisparityError):
    """A single tabular row is invalid where row-level failure must abort."""

    exit_code = 3

    def __init__(self, message: str, row_index: int | None = None):
        super().__init__(message)
        self.row_index = row_index


class QueryError(DisparityError):
    """Malformed filter expression, unknown label, or bad outcome spec."""

    exit_code = 5


class PredicateError(QueryError):
    """Outcome predicate references a field the records do not carry."""


class NotFoundError(DisparityError):
    """A referenced record, anchor, or job does not exist."""

    exit_code = 5


class FeaturizationError(DisparityError):
    """A feature rule could not be evaluated for a record."""

    exit_code = 5

    def __init__(self, message: str, feature: str | None = None):
        super().__init__(message)
        self.feature = feature


class UndefinedSimilarityError(DisparityError):
    """Ratio similarity requested on a zero vector."""

    exit_code = 5


class DegenerateGroupError(DisparityError):
    """A comparison or reference group is empty; statistics cannot proceed."""

    exit_code = 6

    def __init__(self, message: str, n_comparison: int, n_reference: int):
        super().__init__(message)
        self.n_comparison = n_comparison
        self.n_reference = n_reference

    def payload(self) -> dict:
        out = super().payload()
        out["n_comparison"] = self.n_comparison
        out["n_reference"] = self.n_reference
        return out


class DegenerateTableError(DisparityError):
    """A contingency table has a zero marginal total."""

    exit_code = 6

    def __init__(self, message: str, cells: tuple[int, int, int, int]):
        super().__init__(message)
        self.cells = cells

    def payload(self) -> dict:
        out = super().payload()
        out["cells"] = list(self.cells)
        return out


class UndefinedEstimateError(DisparityError):
    """An effect estimate is undefined for the given cells and policy.

    ``reason`` is a short machine-usable phrase (e.g. "zero reference
    events") that downstream artifacts embed as an unavailability marker.
    """

    exit_code = 6

    def __init__(self, message: str, cells: tuple[int, int, int, int], reason: str = ""):
        super().__init__(message)
        self.cells = cells
        self.reason = reason or message

    def payload(self) -> dict:
        out = super().payload()
        out["cells"] = list(self.cells)
        out["reason"] = self.reason
        return out


class AssemblyError(DisparityError):
    """A prompt bundle could not be assembled from an analysis."""

    exit_code = 8

    def __init__(self, message: str, missing: tuple[str, ...] = ()):
        super().__init__(message)
        self.missing = missing

    def payload(self) -> dict:
        out = super().payload()
        out["missing"] = list(self.missing)
        return out


class StructureError(DisparityError):
    """Model output could not be parsed into the required report sections."""

    exit_code = 8

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class TransportError(DisparityError):
    """Provider call failed after retries (or a transient single failure)."""

    exit_code = 7

    def __init__(self, message: str, attempts: int = 1, transient: bool = True):
        super().__init__(message)
        self.attempts = attempts
        self.transient = transient

    def payload(self) -> dict:
        out = super().payload()
        out["attempts"] = self.attempts
        out["transient"] = self.transient
        return out


class BudgetError(DisparityError):
    """The configured request budget is exhausted."""

    exit_code = 7


class ScoringError(DisparityError):
    """A judge response could not be parsed into a score."""

    exit_code = 8

    def __init__(self, message: str, dimension: str = "", raw_text: str = ""):
        super().__init__(message)
        self.dimension = dimension
        self.raw_text = raw_text


class HarnessError(DisparityError):
    """Too many trial failures for a distribution to be trustworthy."""

    exit_code = 9
