"""Query engine for the supported query-language subset.

Grammar (documented as EBNF in docs/query_grammar.md):

    query    = prefix* "SELECT" (var+ | "*") "WHERE" "{" (pattern | filter)* "}"
               order? limit?
    prefix   = "PREFIX" pname ":" iriref
    pattern  = term term term "."          (variables allowed in any position)
    filter   = "FILTER" "(" operand cmp operand ")" "."?
    order    = "ORDER" "BY" ("ASC"|"DESC")? "("? var ")"?
    limit    = "LIMIT" integer

Evaluation is an exhaustive join over the basic graph pattern, followed by
filters, a deterministic sort (the requested key first, canonical binding
order as tie-break), and truncation. Comparison semantics: numerics compare
by value across integer/decimal; strings, booleans, and IRIs support
equality only; comparing across kinds raises QueryTypeError rather than
silently returning false.

Anything in SPARQL but outside this subset fails loudly with
UnsupportedFeatureError naming the feature.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import QuerySyntaxError, QueryTypeError, UnsupportedFeatureError
from .store import Iri, Literal, Term, TripleStore, literal_lexical, term_sort_key

_UNSUPPORTED_KEYWORDS = {
    "OPTIONAL", "UNION", "MINUS", "GRAPH", "SERVICE", "BIND", "VALUES",
    "DISTINCT", "REDUCED", "CONSTRUCT", "ASK", "DESCRIBE", "INSERT",
    "DELETE", "OFFSET", "GROUP", "HAVING", "EXISTS", "NOT", "REGEX",
    "UNDEF", "FROM", "NAMED",
}

_KEYWORDS = {"PREFIX", "SELECT", "WHERE", "FILTER", "ORDER", "BY", "ASC", "DESC", "LIMIT"}

RDF_TYPE = Iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type")


@dataclass(frozen=True)
class Var:
    name: str


PatternTerm = Var | Iri | Literal


@dataclass
class TriplePattern:
    s: PatternTerm
    p: PatternTerm
    o: PatternTerm

    def variables(self) -> list[str]:
        return [t.name for t in (self.s, self.p, self.o) if isinstance(t, Var)]


@dataclass
class FilterExpr:
    left: PatternTerm
    op: str
    right: PatternTerm


@dataclass
class Query:
    select: list[str] | None  # None means *
    patterns: list[TriplePattern]
    filters: list[FilterExpr]
    order: tuple[str, bool] | None  # (variable, ascending)
    limit: int | None

    def pattern_variables(self) -> list[str]:
        seen: list[str] = []
        for pat in self.patterns:
            for name in pat.variables():
                if name not in seen:
                    seen.append(name)
        return seen


@dataclass
class SolutionTable:
    variables: list[str]
    rows: list[dict[str, Term]] = field(default_factory=list)

    def as_tuples(self) -> list[tuple]:
        return [tuple(row.get(v) for v in self.variables) for row in self.rows]

    def as_row_set(self) -> frozenset[tuple]:
        return frozenset(self.as_tuples())


# --- tokenizer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<iriref><[^<>\s]*>)
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<pname>[A-Za-z][A-Za-z0-9_-]*:[A-Za-z0-9_][A-Za-z0-9_.-]*|[A-Za-z][A-Za-z0-9_-]*:)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<neq>!=)
  | (?P<lte><=)
  | (?P<gte>>=)
  | (?P<punct>[{}().,;=<>*/^|!])
    """,
    re.VERBOSE,
)

_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup or ""
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(0), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tok
        self.i += 1
        return t

    def error(self, message: str):
        raise QuerySyntaxError(message, self.tok.pos)

    def is_word(self, *words: str) -> bool:
        return self.tok.kind in ("word", "pname") and self.tok.text.upper() in words

    def check_unsupported(self) -> None:
        if self.tok.kind == "word" and self.tok.text.upper() in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeatureError(self.tok.text.upper())

    def expect_word(self, word: str) -> None:
        self.check_unsupported()
        if not (self.tok.kind == "word" and self.tok.text.upper() == word):
            self.error(f"expected {word}")
        self.advance()

    def expect_punct(self, ch: str) -> None:
        if not (self.tok.kind in ("punct", "neq", "lte", "gte") and self.tok.text == ch):
            self.error(f"expected {ch!r}")
        self.advance()

    def resolve_pname(self, token: _Token) -> Iri:
        prefix, _, local = token.text.partition(":")
        if prefix not in self.prefixes:
            raise QuerySyntaxError(f"undeclared prefix {prefix!r}", token.pos)
        return Iri(self.prefixes[prefix] + local)

    def parse_literal_token(self, token: _Token) -> Literal:
        if token.kind == "string":
            raw = token.text[1:-1]
            out = []
            i = 0
            while i < len(raw):
                if raw[i] == "\\" and i + 1 < len(raw):
                    out.append(_UNESCAPES.get(raw[i + 1], raw[i + 1]))
                    i += 2
                else:
                    out.append(raw[i])
                    i += 1
            return Literal("".join(out))
        if token.kind == "number":
            if re.fullmatch(r"[+-]?\d+", token.text):
                return Literal(int(token.text))
            return Literal(float(token.text))
        raise QuerySyntaxError("expected literal", token.pos)

    def parse_term(self, position: str) -> PatternTerm:
        self.check_unsupported()
        t = self.tok
        if t.kind == "var":
            self.advance()
            return Var(t.text[1:])
        if t.kind == "iriref":
            self.advance()
            return Iri(t.text[1:-1])
        if t.kind == "pname":
            self.advance()
            return self.resolve_pname(t)
        if t.kind == "word" and t.text == "a" and position == "predicate":
            self.advance()
            return RDF_TYPE
        if t.kind == "word" and t.text in ("true", "false"):
            self.advance()
            return Literal(t.text == "true")
        if t.kind in ("string", "number"):
            self.advance()
            return self.parse_literal_token(t)
        if t.kind == "punct" and t.text in ("/", "^", "|"):
            raise UnsupportedFeatureError("property paths")
        self.error(f"unexpected token {t.text!r}")

    def parse(self) -> Query:
        while self.is_word("PREFIX"):
            self.advance()
            if self.tok.kind != "pname" or not self.tok.text.endswith(":"):
                # allow "PREFIX p : <...>" style only via pname token "p:"
                self.error("expected prefix name")
            prefix = self.advance().text[:-1]
            if self.tok.kind != "iriref":
                self.error("expected <IRI> in PREFIX declaration")
            self.prefixes[prefix] = self.advance().text[1:-1]
        self.check_unsupported()
        self.expect_word("SELECT")
        select: list[str] | None
        if self.tok.kind == "punct" and self.tok.text == "*":
            self.advance()
            select = None
        else:
            select = []
            while self.tok.kind == "var":
                select.append(self.advance().text[1:])
            if not select:
                self.error("SELECT needs at least one variable or *")
        self.expect_word("WHERE")
        self.expect_punct("{")
        patterns: list[TriplePattern] = []
        filters: list[FilterExpr] = []
        while not (self.tok.kind == "punct" and self.tok.text == "}"):
            self.check_unsupported()
            if self.tok.kind == "eof":
                self.error("unterminated group pattern")
            if self.tok.kind == "punct" and self.tok.text in (";", ","):
                raise UnsupportedFeatureError("predicate-object lists")
            if self.is_word("FILTER"):
                self.advance()
                self.expect_punct("(")
                left = self.parse_term("operand")
                if self.tok.kind == "neq":
                    op = "!="
                    self.advance()
                elif self.tok.kind == "lte":
                    op = "<="
                    self.advance()
                elif self.tok.kind == "gte":
                    op = ">="
                    self.advance()
                elif self.tok.kind == "punct" and self.tok.text in ("=", "<", ">"):
                    op = self.advance().text
                else:
                    self.error("expected comparison operator")
                right = self.parse_term("operand")
                self.expect_punct(")")
                if self.tok.kind == "punct" and self.tok.text == ".":
                    self.advance()
                filters.append(FilterExpr(left, op, right))
                continue
            s = self.parse_term("subject")
            p = self.parse_term("predicate")
            o = self.parse_term("object")
            patterns.append(TriplePattern(s, p, o))
            if self.tok.kind == "punct" and self.tok.text == ".":
                self.advance()
            elif not (self.tok.kind == "punct" and self.tok.text == "}"):
                if self.tok.kind == "punct" and self.tok.text in (";", ","):
                    raise UnsupportedFeatureError("predicate-object lists")
                self.error("expected '.' between triple patterns")
        self.expect_punct("}")

        order = None
        limit = None
        if self.is_word("ORDER"):
            self.advance()
            self.expect_word("BY")
            ascending = True
            if self.is_word("ASC", "DESC"):
                ascending = self.advance().text.upper() == "ASC"
                self.expect_punct("(")
                if self.tok.kind != "var":
                    self.error("expected variable in ORDER BY")
                order = (self.advance().text[1:], ascending)
                self.expect_punct(")")
            else:
                if self.tok.kind != "var":
                    self.error("expected variable in ORDER BY")
                order = (self.advance().text[1:], ascending)
        if self.is_word("LIMIT"):
            self.advance()
            if self.tok.kind != "number" or not re.fullmatch(r"\d+", self.tok.text):
                self.error("expected non-negative integer after LIMIT")
            limit = int(self.advance().text)
        self.check_unsupported()
        if self.tok.kind != "eof":
            self.error(f"unexpected trailing content {self.tok.text!r}")

        q = Query(select=select, patterns=patterns, filters=filters, order=order, limit=limit)
        bgp_vars = set(q.pattern_variables())
        if q.select is not None:
            for v in q.select:
                if v not in bgp_vars:
                    raise QuerySyntaxError(f"selected variable ?{v} does not occur in the pattern", 0)
        for f in q.filters:
            for side in (f.left, f.right):
                if isinstance(side, Var) and side.name not in bgp_vars:
                    raise QuerySyntaxError(f"filter variable ?{side.name} does not occur in the pattern", 0)
        if q.order is not None and q.order[0] not in bgp_vars:
            raise QuerySyntaxError(f"order variable ?{q.order[0]} does not occur in the pattern", 0)
        return q


def parse_query(text: str) -> Query:
    return _Parser(text).parse()


# --- evaluation ----------------------------------------------------------------


def _ground(term: PatternTerm, binding: dict[str, Term]) -> Term | None:
    if isinstance(term, Var):
        return binding.get(term.name)
    return term


def _compare(left: Term, op: str, right: Term) -> bool:
    if isinstance(left, Iri) and isinstance(right, Iri):
        if op == "=":
            return str(left) == str(right)
        if op == "!=":
            return str(left) != str(right)
        raise QueryTypeError(f"ordering comparison {op!r} is not defined for IRIs")
    if isinstance(left, Literal) and isinstance(right, Literal):
        lv, rv = left.value, right.value
        if left.is_numeric and right.is_numeric:
            return {
                "=": lv == rv, "!=": lv != rv, "<": lv < rv,
                "<=": lv <= rv, ">": lv > rv, ">=": lv >= rv,
            }[op]
        if isinstance(lv, str) and isinstance(rv, str):
            if op == "=":
                return lv == rv
            if op == "!=":
                return lv != rv
            raise QueryTypeError(f"ordering comparison {op!r} is not defined for strings")
        if isinstance(lv, bool) and isinstance(rv, bool):
            if op == "=":
                return lv == rv
            if op == "!=":
                return lv != rv
            raise QueryTypeError(f"ordering comparison {op!r} is not defined for booleans")
    raise QueryTypeError(
        f"cross-type comparison between {type(left).__name__} and {type(right).__name__} operands"
    )


def evaluate(store: TripleStore, query: Query) -> SolutionTable:
    bindings: list[dict[str, Term]] = [{}]
    for pat in query.patterns:
        next_bindings = []
        for binding in bindings:
            s = _ground(pat.s, binding)
            p = _ground(pat.p, binding)
            o = _ground(pat.o, binding)
            if (s is not None and not isinstance(s, Iri)) or (p is not None and not isinstance(p, Iri)):
                continue  # a literal can never be a subject or predicate
            candidates = store.match(s=s, p=p, o=o)
            for t in candidates:
                new = dict(binding)
                ok = True
                for term, value in ((pat.s, t.s), (pat.p, t.p), (pat.o, t.o)):
                    if isinstance(term, Var):
                        if term.name in new and new[term.name] != value:
                            ok = False
                            break
                        new[term.name] = value
                    elif term != value:
                        ok = False
                        break
                if ok:
                    next_bindings.append(new)
        bindings = next_bindings
        if not bindings:
            break

    for f in query.filters:
        kept = []
        for binding in bindings:
            left = _ground(f.left, binding)
            right = _ground(f.right, binding)
            if _compare(left, f.op, right):
                kept.append(binding)
        bindings = kept

    variables = query.select if query.select is not None else query.pattern_variables()
    rows = [{v: b[v] for v in variables} for b in bindings]

    def canonical_key(row: dict[str, Term]):
        return tuple(term_sort_key(row[v]) for v in variables)

    rows.sort(key=canonical_key)
    if query.order is not None:
        var, ascending = query.order
        rows.sort(key=lambda r: term_sort_key(r[var]) if var in r else (2,), reverse=not ascending)
    if query.limit is not None:
        rows = rows[: query.limit]
    return SolutionTable(variables=variables, rows=rows)


def run_query(store: TripleStore, text: str) -> SolutionTable:
    """Parse and evaluate query text against a store."""
    return evaluate(store, parse_query(text))


# --- result rendering ------------------------------------------------------------


def render_term_plain(term: Term) -> str:
    if isinstance(term, Iri):
        return str(term)
    return literal_lexical(term)


def table_to_tsv(table: SolutionTable) -> str:
    lines = ["\t".join(table.variables)]
    for row in table.rows:
        lines.append("\t".join(render_term_plain(row[v]) if v in row else "" for v in table.variables))
    return "\n".join(lines) + "\n"


def term_to_json(term: Term) -> dict:
    if isinstance(term, Iri):
        return {"type": "iri", "value": str(term)}
    out = {"type": "literal", "value": term.value}
    if term.datatype is not None:
        out["datatype"] = term.datatype
    return out


def table_to_json(table: SolutionTable) -> dict:
    return {
        "variables": table.variables,
        "rows": [{v: term_to_json(row[v]) for v in table.variables if v in row} for row in table.rows],
    }
