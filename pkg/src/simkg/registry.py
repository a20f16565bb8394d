"""Fixed vocabulary registry: ontology terms, namespaces, and units.

The registry is compiled in from ``data/terms.tsv`` at import time and is
immutable afterwards, so it can be shared freely across threads. Every
predicate emitted anywhere in simkg must resolve here; there are no ad-hoc
IRIs. Class terms form an acyclic superclass forest rooted at the three
provenance roots (entity, activity, agent).

Grain-boundary descriptors (sigma value, misorientation angle, tilt axis,
boundary plane) are local extensions of the vocabulary and are marked as
such in the shipped registry file.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .errors import MalformedCurieError, NotAClassError, UnknownTermError, UnknownUnitError

REGISTRY_VERSION = "1"

CURIE_RE = re.compile(r"^[a-z]+:[A-Za-z][A-Za-z0-9]*$")

# The single place where namespace base IRIs are declared.
PREFIXES: dict[str, str] = {
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "xsd": "http://www.w3.org/2001/XMLSchema#",
    "prov": "http://www.w3.org/ns/prov#",
    "cmso": "https://w3id.org/simkg/cmso#",
    "asmo": "https://w3id.org/simkg/asmo#",
    "unit": "http://qudt.org/vocab/unit/",
    "sample": "https://w3id.org/simkg/sample/",
    "activity": "https://w3id.org/simkg/activity/",
    "property": "https://w3id.org/simkg/property/",
    "operation": "https://w3id.org/simkg/operation/",
}

TERM_KINDS = ("class", "object_property", "data_property", "named_individual")

QUANTITY_KINDS = (
    "energy",
    "length",
    "temperature",
    "pressure",
    "area_energy",
    "angle",
    "inverse_temperature",
    "volume",
    "energy_per_atom",
    "dimensionless",
    "time",
    "force",
)


@dataclass(frozen=True)
class TermRecord:
    curie: str
    iri: str
    kind: str
    superclass: str | None
    label: str


@dataclass(frozen=True)
class UnitRecord:
    symbol: str
    iri: str
    quantity_kind: str
    label: str


def expand_curie(curie: str) -> str:
    """Expand prefix:LocalName to a full IRI using the declared prefixes."""
    prefix, _, local = curie.partition(":")
    if prefix not in PREFIXES:
        raise MalformedCurieError(f"unknown prefix {prefix!r} in {curie!r}")
    return PREFIXES[prefix] + local


def compress_iri(iri: str) -> str | None:
    """Return the prefix:LocalName form of an IRI, or None if no prefix matches."""
    best = None
    for prefix, base in PREFIXES.items():
        if iri.startswith(base) and (best is None or len(base) > len(PREFIXES[best])):
            best = prefix
    if best is None:
        return None
    return f"{best}:{iri[len(PREFIXES[best]):]}"


def _load() -> tuple[dict[str, TermRecord], dict[str, UnitRecord], str]:
    text = resources.files("simkg.data").joinpath("terms.tsv").read_text(encoding="utf-8")
    terms: dict[str, TermRecord] = {}
    units: dict[str, UnitRecord] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        tag = fields[0]
        if tag == "term":
            if len(fields) != 6:
                raise RuntimeError(f"terms.tsv line {lineno}: expected 6 fields, got {len(fields)}")
            _, curie, iri, kind, superclass, label = fields
            if not CURIE_RE.match(curie):
                raise RuntimeError(f"terms.tsv line {lineno}: malformed curie {curie!r}")
            if kind not in TERM_KINDS:
                raise RuntimeError(f"terms.tsv line {lineno}: unknown kind {kind!r}")
            if expand_curie(curie) != iri:
                raise RuntimeError(f"terms.tsv line {lineno}: iri does not match prefix map")
            if curie in terms:
                raise RuntimeError(f"terms.tsv line {lineno}: duplicate curie {curie!r}")
            terms[curie] = TermRecord(
                curie=curie,
                iri=iri,
                kind=kind,
                superclass=None if superclass == "-" else superclass,
                label=label,
            )
        elif tag == "unit":
            if len(fields) != 5:
                raise RuntimeError(f"terms.tsv line {lineno}: expected 5 fields, got {len(fields)}")
            _, symbol, iri, quantity_kind, label = fields
            if quantity_kind not in QUANTITY_KINDS:
                raise RuntimeError(f"terms.tsv line {lineno}: unknown quantity kind {quantity_kind!r}")
            if symbol in units:
                raise RuntimeError(f"terms.tsv line {lineno}: duplicate unit {symbol!r}")
            units[symbol] = UnitRecord(symbol=symbol, iri=iri, quantity_kind=quantity_kind, label=label)
        else:
            raise RuntimeError(f"terms.tsv line {lineno}: unknown record tag {tag!r}")

    for rec in terms.values():
        if rec.superclass is None:
            continue
        parent = terms.get(rec.superclass)
        if parent is None or parent.kind != "class":
            raise RuntimeError(f"{rec.curie}: superclass {rec.superclass!r} is not a registered class")
    # acyclicity: every chain must terminate within |terms| steps
    for rec in terms.values():
        seen = set()
        cur: str | None = rec.curie
        while cur is not None:
            if cur in seen:
                raise RuntimeError(f"superclass cycle through {cur!r}")
            seen.add(cur)
            cur = terms[cur].superclass
    return terms, units, text


_TERMS, _UNITS, _RAW_TEXT = _load()

_TERMS_BY_IRI = {rec.iri: rec for rec in _TERMS.values()}


def resolve_term(curie: str) -> TermRecord:
    """Return the registry record for a CURIE.

    Raises MalformedCurieError for bad syntax and UnknownTermError for a
    syntactically valid but unregistered name.
    """
    if not CURIE_RE.match(curie):
        raise MalformedCurieError(f"not a valid prefix:LocalName curie: {curie!r}")
    rec = _TERMS.get(curie)
    if rec is None:
        raise UnknownTermError(f"unregistered term: {curie!r}")
    return rec


def term_by_iri(iri: str) -> TermRecord | None:
    return _TERMS_BY_IRI.get(iri)


def is_registered_predicate(iri: str) -> bool:
    rec = _TERMS_BY_IRI.get(iri)
    return rec is not None and rec.kind in ("object_property", "data_property")


def superclass_chain(curie: str) -> list[str]:
    """Return the superclass chain for a class curie, self first, root last."""
    rec = resolve_term(curie)
    if rec.kind != "class":
        raise NotAClassError(f"{curie!r} is a {rec.kind}, not a class")
    chain = [rec.curie]
    cur = rec.superclass
    while cur is not None:
        chain.append(cur)
        cur = _TERMS[cur].superclass
    return chain


def unit_lookup(symbol: str) -> UnitRecord:
    rec = _UNITS.get(symbol)
    if rec is None:
        raise UnknownUnitError(f"unregistered unit symbol: {symbol!r}")
    return rec


def unit_by_iri(iri: str) -> UnitRecord | None:
    for rec in _UNITS.values():
        if rec.iri == iri:
            return rec
    return None


def iter_terms() -> list[TermRecord]:
    return list(_TERMS.values())


def iter_units() -> list[UnitRecord]:
    return list(_UNITS.values())


def dump_registry() -> str:
    """Return the raw registry file text, exactly as shipped."""
    return _RAW_TEXT
