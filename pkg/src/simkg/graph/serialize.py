"""Canonical graph serialization: N-Triples and a Turtle subset.

N-Triples output is canonical: one triple per line, lines sorted
lexicographically by rendered (subject, predicate, object), floats written
in positional shortest-round-trip form. Two stores with equal triple sets
therefore serialize to byte-identical text.

Turtle output groups triples by subject (subjects sorted), renders rdf:type
as ``a`` first, compresses IRIs through the store's prefix map where the
local name is safe, and is likewise deterministic. The Turtle reader accepts
exactly this subset: @prefix declarations, subject groups with ``;``/``,``
lists, quoted literals with optional ^^datatype. Blank nodes do not exist
in this system and are not parsed.
"""
from __future__ import annotations

import re

from ..errors import ParseError, UnknownPrefixError
from .store import (
    XSD,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_INTEGER,
    Iri,
    Literal,
    Triple,
    TripleStore,
    literal_lexical,
    term_sort_key,
)

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}

_SAFE_LOCAL = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_-]*$")

XSD_DOUBLE = XSD + "double"


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def render_term_nt(term) -> str:
    if isinstance(term, Iri):
        return f"<{term}>"
    lex = _escape(literal_lexical(term))
    dt = term.datatype
    if dt is None:
        return f'"{lex}"'
    return f'"{lex}"^^<{dt}>'


def serialize_ntriples(store: TripleStore) -> str:
    rendered = sorted(
        (render_term_nt(t.s), render_term_nt(t.p), render_term_nt(t.o)) for t in store
    )
    return "".join(f"{s} {p} {o} .\n" for s, p, o in rendered)


def _compress(iri: Iri, prefixes: dict[str, str]) -> str:
    best_prefix = None
    best_base = ""
    for prefix, base in prefixes.items():
        if iri.startswith(base) and len(base) > len(best_base):
            local = str(iri)[len(base):]
            if _SAFE_LOCAL.match(local):
                best_prefix, best_base = prefix, base
    if best_prefix is None:
        return f"<{iri}>"
    return f"{best_prefix}:{str(iri)[len(best_base):]}"


def _render_term_ttl(term, prefixes: dict[str, str]) -> str:
    if isinstance(term, Iri):
        return _compress(term, prefixes)
    lex = _escape(literal_lexical(term))
    dt = term.datatype
    if dt is None:
        return f'"{lex}"'
    return f'"{lex}"^^{_compress(Iri(dt), prefixes)}'


RDF_TYPE_IRI = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"


def serialize_turtle(store: TripleStore) -> str:
    prefixes = dict(sorted(store.prefixes.items()))
    lines = [f"@prefix {p}: <{base}> ." for p, base in prefixes.items()]
    by_subject: dict[Iri, dict[Iri, list]] = {}
    for t in store:
        by_subject.setdefault(t.s, {}).setdefault(t.p, []).append(t.o)
    if by_subject:
        lines.append("")
    for subj in sorted(by_subject):
        preds = by_subject[subj]

        def pred_key(p: Iri):
            return (0 if str(p) == RDF_TYPE_IRI else 1, _render_term_ttl(p, prefixes))

        parts = []
        for p in sorted(preds, key=pred_key):
            rendered_p = "a" if str(p) == RDF_TYPE_IRI else _render_term_ttl(p, prefixes)
            objs = sorted(preds[p], key=term_sort_key)
            rendered_o = " , ".join(_render_term_ttl(o, prefixes) for o in objs)
            parts.append(f"{rendered_p} {rendered_o}")
        body = " ;\n    ".join(parts)
        lines.append(f"{_render_term_ttl(subj, prefixes)} {body} .")
    return "\n".join(lines) + "\n"


def serialize(store: TripleStore, format: str = "ntriples") -> str:
    if format == "ntriples":
        return serialize_ntriples(store)
    if format == "turtle":
        return serialize_turtle(store)
    raise ValueError(f"unknown serialization format: {format!r}")


# --- parsing ------------------------------------------------------------------


class _Scanner:
    def __init__(self, text: str, line: int):
        self.text = text
        self.pos = 0
        self.line = line

    def error(self, message: str):
        raise ParseError(message, self.line)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take_iri(self) -> Iri:
        self.skip_ws()
        if self.peek() != "<":
            self.error("expected <IRI>")
        end = self.text.find(">", self.pos + 1)
        if end < 0:
            self.error("unterminated IRI")
        iri = self.text[self.pos + 1 : end]
        self.pos = end + 1
        return Iri(iri)

    def take_string(self) -> str:
        self.skip_ws()
        if self.peek() != '"':
            self.error("expected quoted literal")
        self.pos += 1
        out = []
        while True:
            if self.pos >= len(self.text):
                self.error("unterminated literal")
            ch = self.text[self.pos]
            if ch == '"':
                self.pos += 1
                return "".join(out)
            if ch == "\\":
                self.pos += 1
                if self.pos >= len(self.text):
                    self.error("dangling escape")
                esc = self.text[self.pos]
                if esc in _UNESCAPES:
                    out.append(_UNESCAPES[esc])
                    self.pos += 1
                elif esc == "u":
                    out.append(chr(int(self.text[self.pos + 1 : self.pos + 5], 16)))
                    self.pos += 5
                elif esc == "U":
                    out.append(chr(int(self.text[self.pos + 1 : self.pos + 9], 16)))
                    self.pos += 9
                else:
                    self.error(f"unknown escape \\{esc}")
            else:
                out.append(ch)
                self.pos += 1

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1


def _typed_literal(lex: str, datatype: str | None, line: int) -> Literal:
    try:
        if datatype is None:
            return Literal(lex)
        if datatype == XSD_INTEGER:
            return Literal(int(lex))
        if datatype in (XSD_DECIMAL, XSD_DOUBLE):
            return Literal(float(lex))
        if datatype == XSD_BOOLEAN:
            if lex not in ("true", "false"):
                raise ValueError(lex)
            return Literal(lex == "true")
    except ValueError as exc:
        raise ParseError(f"bad literal {lex!r} for datatype {datatype}", line) from exc
    raise ParseError(f"unsupported literal datatype {datatype}", line)


def deserialize_ntriples(text: str, store: TripleStore | None = None) -> TripleStore:
    store = store or TripleStore()
    triples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        sc = _Scanner(line, lineno)
        s = sc.take_iri()
        p = sc.take_iri()
        if sc.peek() == "<":
            o = sc.take_iri()
        else:
            lex = sc.take_string()
            datatype = None
            sc.skip_ws()
            if sc.text[sc.pos : sc.pos + 2] == "^^":
                sc.pos += 2
                datatype = str(sc.take_iri())
            o = _typed_literal(lex, datatype, lineno)
        sc.expect(".")
        if not sc.at_end():
            sc.error("trailing content after '.'")
        triples.append(Triple(s, p, o))
    store.add_triples(triples)
    return store


_PNAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*:[A-Za-z0-9_][A-Za-z0-9_-]*|[A-Za-z][A-Za-z0-9_-]*:")


def deserialize_turtle(text: str, store: TripleStore | None = None) -> TripleStore:
    store = store or TripleStore()
    prefixes: dict[str, str] = {}
    triples: list[Triple] = []

    # one scanner over the whole text, with line tracking
    class TtlScanner(_Scanner):
        def skip_ws(self) -> None:
            while self.pos < len(self.text):
                ch = self.text[self.pos]
                if ch == "\n":
                    self.line += 1
                    self.pos += 1
                elif ch in " \t\r":
                    self.pos += 1
                elif ch == "#":
                    nl = self.text.find("\n", self.pos)
                    self.pos = len(self.text) if nl < 0 else nl
                else:
                    return

    sc = TtlScanner(text, 1)

    def resolve_pname(token: str) -> Iri:
        prefix, _, local = token.partition(":")
        if prefix not in prefixes:
            raise UnknownPrefixError(f"line {sc.line}: undeclared prefix {prefix!r}")
        return Iri(prefixes[prefix] + local)

    def take_resource() -> Iri:
        if sc.peek() == "<":
            return sc.take_iri()
        m = _PNAME_RE.match(sc.text, sc.pos)
        if not m:
            sc.error("expected IRI or prefixed name")
        sc.pos = m.end()
        return resolve_pname(m.group(0))

    def take_object():
        ch = sc.peek()
        if ch == "<":
            return sc.take_iri()
        if ch == '"':
            lex = sc.take_string()
            datatype = None
            if sc.text[sc.pos : sc.pos + 2] == "^^":
                sc.pos += 2
                if sc.peek() == "<":
                    datatype = str(sc.take_iri())
                else:
                    datatype = str(take_resource())
            return _typed_literal(lex, datatype, sc.line)
        return take_resource()

    while not sc.at_end():
        if sc.text.startswith("@prefix", sc.pos):
            sc.pos += len("@prefix")
            sc.skip_ws()
            m = re.match(r"[A-Za-z][A-Za-z0-9_-]*:", sc.text[sc.pos :])
            if not m:
                sc.error("expected prefix name in @prefix")
            prefix = m.group(0)[:-1]
            sc.pos += m.end()
            base = str(sc.take_iri())
            sc.expect(".")
            prefixes[prefix] = base
            continue
        subj = take_resource()
        while True:
            sc.skip_ws()
            if sc.text.startswith("a", sc.pos) and (
                sc.pos + 1 >= len(sc.text) or sc.text[sc.pos + 1] in " \t\n"
            ):
                pred = Iri(RDF_TYPE_IRI)
                sc.pos += 1
            else:
                pred = take_resource()
            while True:
                obj = take_object()
                triples.append(Triple(subj, pred, obj))
                if sc.peek() == ",":
                    sc.expect(",")
                    continue
                break
            if sc.peek() == ";":
                sc.expect(";")
                continue
            sc.expect(".")
            break

    store.prefixes.update(prefixes)
    store.add_triples(triples)
    return store


def deserialize(text: str, format: str = "ntriples", store: TripleStore | None = None) -> TripleStore:
    if format == "ntriples":
        return deserialize_ntriples(text, store)
    if format == "turtle":
        return deserialize_turtle(text, store)
    raise ValueError(f"unknown serialization format: {format!r}")
