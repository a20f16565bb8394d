"""Knowledge graph core: store, identifiers, conversion, serialization, queries."""
from .identifiers import IriMinter, mint_instance_iri, structure_hash
from .query import SolutionTable, parse_query, run_query, table_to_json, table_to_tsv
from .serialize import deserialize, serialize
from .store import Iri, Literal, Triple, TripleStore

__all__ = [
    "Iri",
    "IriMinter",
    "Literal",
    "SolutionTable",
    "Triple",
    "TripleStore",
    "deserialize",
    "from_graph",
    "mint_instance_iri",
    "parse_query",
    "run_query",
    "serialize",
    "structure_hash",
    "table_to_json",
    "table_to_tsv",
    "to_graph",
]


def __getattr__(name):
    # convert depends on the models module, which itself imports from this
    # package; defer its import so both orders work
    if name in ("from_graph", "to_graph"):
        from . import convert

        return getattr(convert, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
