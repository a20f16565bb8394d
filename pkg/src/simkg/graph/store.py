"""In-memory triple store with set semantics and per-position indexes.

Terms are either :class:`Iri` (a str subclass) or :class:`Literal` holding a
string, integer, decimal, or boolean value. Every predicate added to a store
must resolve in the term registry, and object/data property discipline is
enforced: object properties link to IRIs, data properties to literals.

Concurrency contract: many readers XOR one writer. All mutating entry points
take a non-blocking writer mutex for the whole batch; a second concurrent
writer fails fast with StoreWriteConflictError instead of corrupting indexes.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Iterator, NamedTuple

from ..errors import StoreWriteConflictError, UnregisteredPredicateError
from ..registry import PREFIXES, term_by_iri

XSD = "http://www.w3.org/2001/XMLSchema#"
XSD_INTEGER = XSD + "integer"
XSD_DECIMAL = XSD + "decimal"
XSD_BOOLEAN = XSD + "boolean"

RDF_TYPE = PREFIXES["rdf"] + "type"


class Iri(str):
    """An absolute IRI. Subclassing str keeps terms hashable and sortable."""

    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Iri({str.__repr__(self)})"


@dataclass(frozen=True)
class Literal:
    """Typed literal; value is one of str, int, float, bool."""

    value: str | int | float | bool

    def __post_init__(self):
        if isinstance(self.value, float) and not math.isfinite(self.value):
            raise ValueError("non-finite literals are not representable")
        if not isinstance(self.value, (str, int, float, bool)):
            raise TypeError(f"unsupported literal type: {type(self.value).__name__}")

    @property
    def datatype(self) -> str | None:
        """Datatype IRI, or None for plain string literals."""
        if isinstance(self.value, bool):
            return XSD_BOOLEAN
        if isinstance(self.value, int):
            return XSD_INTEGER
        if isinstance(self.value, float):
            return XSD_DECIMAL
        return None

    @property
    def is_numeric(self) -> bool:
        return isinstance(self.value, (int, float)) and not isinstance(self.value, bool)


Term = Iri | Literal


class Triple(NamedTuple):
    s: Iri
    p: Iri
    o: Term


def format_decimal(x: float) -> str:
    """Canonical positional decimal for a float; parses back to the same bits.

    Uses the shortest round-trip repr expanded to positional notation, so the
    lexical form contains no exponent and re-reading it is exact.
    """
    r = repr(float(x))
    if "e" in r or "E" in r:
        r = format(Decimal(r), "f")
    if "." not in r:
        r += ".0"
    return r


def literal_lexical(lit: Literal) -> str:
    v = lit.value
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format_decimal(v)
    return v


def term_sort_key(term: Term):
    """Total deterministic order over terms: IRIs first, then literals."""
    if isinstance(term, Iri):
        return (0, "", str(term))
    kind = {bool: "b", int: "n", float: "n", str: "s"}[type(term.value)]
    if kind == "n":
        return (1, kind, float(term.value), literal_lexical(term))
    return (1, kind, literal_lexical(term))


class TripleStore:
    """Set of triples with subject/predicate/object indexes and a prefix map."""

    def __init__(self, prefixes: dict[str, str] | None = None):
        self._triples: set[Triple] = set()
        self._by_s: dict[Iri, set[Triple]] = {}
        self._by_p: dict[Iri, set[Triple]] = {}
        self._by_o: dict[Term, set[Triple]] = {}
        self.prefixes: dict[str, str] = dict(prefixes or PREFIXES)
        self._write_lock = threading.Lock()

    # -- mutation -------------------------------------------------------

    def _writer(self):
        if not self._write_lock.acquire(blocking=False):
            raise StoreWriteConflictError("another writer holds the store")
        return self._write_lock

    @staticmethod
    def _check(triple: Triple) -> None:
        rec = term_by_iri(str(triple.p))
        if rec is None or rec.kind not in ("object_property", "data_property"):
            raise UnregisteredPredicateError(f"predicate not in registry: {triple.p}")
        if rec.kind == "object_property" and not isinstance(triple.o, Iri):
            raise UnregisteredPredicateError(f"object property {rec.curie} requires an IRI object")
        if rec.kind == "data_property" and not isinstance(triple.o, Literal):
            raise UnregisteredPredicateError(f"data property {rec.curie} requires a literal object")

    def _insert(self, triple: Triple) -> bool:
        if triple in self._triples:
            return False
        self._check(triple)
        self._triples.add(triple)
        self._by_s.setdefault(triple.s, set()).add(triple)
        self._by_p.setdefault(triple.p, set()).add(triple)
        self._by_o.setdefault(triple.o, set()).add(triple)
        return True

    def add(self, s: Iri, p: Iri, o: Term) -> bool:
        """Add one triple; returns True if it was new."""
        lock = self._writer()
        try:
            return self._insert(Triple(s, p, o))
        finally:
            lock.release()

    def add_triples(self, triples: Iterable[Triple]) -> int:
        """Add a batch under one writer acquisition; returns the number added."""
        lock = self._writer()
        try:
            return sum(1 for t in triples if self._insert(t))
        finally:
            lock.release()

    def remove(self, triple: Triple) -> bool:
        lock = self._writer()
        try:
            if triple not in self._triples:
                return False
            self._triples.discard(triple)
            self._by_s[triple.s].discard(triple)
            self._by_p[triple.p].discard(triple)
            self._by_o[triple.o].discard(triple)
            return True
        finally:
            lock.release()

    # -- read access ----------------------------------------------------

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._triples

    def as_set(self) -> frozenset[Triple]:
        return frozenset(self._triples)

    def match(self, s: Iri | None = None, p: Iri | None = None, o: Term | None = None) -> list[Triple]:
        """All triples matching the given pattern; None is a wildcard."""
        candidates: set[Triple] | None = None
        if s is not None:
            candidates = self._by_s.get(s, set())
        elif o is not None:
            candidates = self._by_o.get(o, set())
        elif p is not None:
            candidates = self._by_p.get(p, set())
        if candidates is None:
            candidates = self._triples
        out = []
        for t in candidates:
            if s is not None and t.s != s:
                continue
            if p is not None and t.p != p:
                continue
            if o is not None and t.o != o:
                continue
            out.append(t)
        return out

    def objects(self, s: Iri, p: Iri) -> list[Term]:
        return [t.o for t in self.match(s=s, p=p)]

    def value(self, s: Iri, p: Iri) -> Term | None:
        objs = self.objects(s, p)
        if not objs:
            return None
        return sorted(objs, key=term_sort_key)[0]

    def subjects_with(self, p: Iri, o: Term) -> list[Iri]:
        return sorted({t.s for t in self.match(p=p, o=o)})

    def types_of(self, s: Iri) -> list[Iri]:
        return sorted(o for o in self.objects(s, Iri(RDF_TYPE)) if isinstance(o, Iri))

    def subjects(self) -> list[Iri]:
        return sorted(self._by_s.keys())
