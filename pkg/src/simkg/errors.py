"""Exception hierarchy shared by all simkg modules.

Every domain failure raises a subclass of :class:`SimkgError`; the CLI maps
these to exit code 1. Anything else escaping a public entry point is a bug.
"""
from __future__ import annotations


class SimkgError(Exception):
    """Base class for all domain errors raised by simkg."""


# --- term registry ---------------------------------------------------------

class MalformedCurieError(SimkgError):
    """CURIE does not match the required prefix:LocalName syntax."""


class UnknownTermError(SimkgError):
    """CURIE is syntactically valid but not registered."""


class NotAClassError(SimkgError):
    """A class-only operation was applied to a property or individual."""


class UnknownUnitError(SimkgError):
    """Unit symbol is not in the unit registry."""


# --- templates --------------------------------------------------------------

class TemplateSyntaxError(SimkgError):
    """Template text is not well-formed YAML/JSON."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{loc}")


class SchemaError(SimkgError):
    """Template structure violates the schema; carries the offending key path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


# --- models -----------------------------------------------------------------

class DanglingReferenceError(SimkgError):
    """An id was cited but is neither defined in the document nor in the graph."""


class InternalInconsistencyError(SimkgError):
    """The document contradicts itself in a way validation cannot report."""


# --- graph ------------------------------------------------------------------

class MissingCellError(SimkgError):
    """Structure hashing requires a simulation cell."""


class UnregisteredPredicateError(SimkgError):
    """A triple was about to be emitted with a predicate outside the registry."""


class StoreWriteConflictError(SimkgError):
    """Two writers attempted to mutate the same store concurrently."""


class UnknownInstanceError(SimkgError):
    """IRI has no type triple in the store."""


class IncompleteInstanceError(SimkgError):
    """Instance is missing mandatory predicates; lists the absent ones."""

    def __init__(self, iri: str, missing: list[str]):
        self.iri = iri
        self.missing = list(missing)
        super().__init__(f"{iri} is missing mandatory predicates: {', '.join(self.missing)}")


class QuerySyntaxError(SimkgError):
    """Query text failed to parse; carries the character position."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class UnsupportedFeatureError(SimkgError):
    """Query uses grammar outside the supported subset."""

    def __init__(self, feature: str):
        self.feature = feature
        super().__init__(f"unsupported query feature: {feature}")


class QueryTypeError(SimkgError):
    """FILTER comparison across incompatible operand types."""


class ParseError(SimkgError):
    """Serialized graph text is malformed; carries the line number."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class UnknownPrefixError(SimkgError):
    """Turtle text uses a prefix that was never declared."""


# --- ingest -----------------------------------------------------------------

class CountMismatchError(SimkgError):
    """Extended-XYZ frame declares a different atom count than it contains."""


class BadLatticeError(SimkgError):
    """Extended-XYZ Lattice entry is absent or not nine decimals."""


class UnknownElementError(SimkgError):
    """Atom line uses a symbol outside the periodic table."""


class HeaderMismatchError(SimkgError):
    """CSV header row does not provide the columns the mapping expects."""


class RowError(SimkgError):
    """A CSV data row failed validation; carries the row index and code."""

    def __init__(self, row: int, code: str, message: str):
        self.row = row
        self.code = code
        super().__init__(f"row {row}: [{code}] {message}")


# --- provenance -------------------------------------------------------------

class CyclicProvenanceError(SimkgError):
    """Backward traversal found a directed cycle; the store is corrupt."""


class NotADagError(SimkgError):
    """Operation requires an acyclic provenance graph."""


# --- reconstruct ------------------------------------------------------------

class OutdirNotEmptyError(SimkgError):
    """Reconstruction refuses to write into a non-empty directory."""


class TemplateGapError(SimkgError):
    """No step template is registered for an activity's method class."""


# --- derive -----------------------------------------------------------------

class InsufficientPointsError(SimkgError):
    """Fewer data points than the operation requires."""


class DegenerateXError(SimkgError):
    """All x values coincide; the fit is undefined."""


class NoMatchingDataError(SimkgError):
    """Selector query returned no rows."""


class UnitMismatchError(SimkgError):
    """Property has the wrong unit or quantity kind for the operation."""


class NonPositiveCountsError(SimkgError):
    """Atom counts must be at least one."""


# --- toysim -----------------------------------------------------------------

class CellTooSmallError(SimkgError):
    """Cell is too small for the minimum-image convention at this cutoff."""


class NonFiniteCoordinatesError(SimkgError):
    """Configuration contains NaN or infinite coordinates."""


class NonFiniteEnergyError(SimkgError):
    """Energy evaluation overflowed; carries the closest pair diagnostic."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None, distance: float | None = None):
        self.pair = pair
        self.distance = distance
        super().__init__(message)
