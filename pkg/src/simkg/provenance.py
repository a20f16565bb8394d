"""Backward provenance: trace, DOT export, and workflow structural equivalence.

``trace`` walks backward from a target node along the four provenance
relations (used, wasGeneratedBy, wasDerivedFrom, wasAssociatedWith) and
returns the closed subgraph as a typed DAG. Software agents reached through
wasAssociatedWith are included as entity nodes.

``workflow_signature`` canonicalizes the labeled DAG so that two provenance
graphs get equal signatures exactly when a label-preserving isomorphism
exists. At the ``method_superclass`` abstraction level each node label is
lifted to its highest registered superclass below the provenance root, which
makes workflows of identical shape but different simulation methods compare
equal, while the concrete level keeps them apart.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import CyclicProvenanceError, NotADagError, UnknownInstanceError
from .graph.store import Iri, Literal, Triple, TripleStore
from .registry import PREFIXES, superclass_chain, term_by_iri

PROV = PREFIXES["prov"]
TRACE_RELATIONS = {
    Iri(PROV + "used"): "used",
    Iri(PROV + "wasGeneratedBy"): "wasGeneratedBy",
    Iri(PROV + "wasDerivedFrom"): "wasDerivedFrom",
    Iri(PROV + "wasAssociatedWith"): "wasAssociatedWith",
}

RDFS_LABEL = Iri(PREFIXES["rdfs"] + "label")

_NODE_SHAPES = {"entity": "box", "activity": "ellipse", "operation": "diamond"}


@dataclass(frozen=True)
class ProvNode:
    iri: str
    node_kind: str  # entity | activity | operation
    class_curie: str | None
    label: str


@dataclass(frozen=True)
class ProvEdge:
    src: str
    dst: str
    relation: str


@dataclass
class ProvenanceGraph:
    target: str
    nodes: list[ProvNode] = field(default_factory=list)
    edges: list[ProvEdge] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def node(self, iri: str) -> ProvNode:
        for n in self.nodes:
            if n.iri == iri:
                return n
        raise KeyError(iri)

    def kind_census(self) -> dict[str, int]:
        census: dict[str, int] = {}
        for n in self.nodes:
            census[n.node_kind] = census.get(n.node_kind, 0) + 1
        return census

    def class_census(self) -> dict[str, int]:
        census: dict[str, int] = {}
        for n in self.nodes:
            key = n.class_curie or "?"
            census[key] = census.get(key, 0) + 1
        return census


def _local_name(iri: str) -> str:
    for sep in ("#", "/"):
        if sep in iri:
            return iri.rsplit(sep, 1)[1]
    return iri


def _classify(store: TripleStore, iri: Iri) -> tuple[str, str | None, str]:
    class_curie = None
    for t in store.types_of(iri):
        rec = term_by_iri(str(t))
        if rec is not None and rec.kind == "class":
            class_curie = rec.curie
            break
    kind = "entity"
    if class_curie is not None:
        chain = superclass_chain(class_curie)
        if "asmo:MathematicalOperation" in chain:
            kind = "operation"
        elif chain[-1] == "prov:Activity":
            kind = "activity"
    label_term = store.value(iri, RDFS_LABEL)
    label = str(label_term.value) if isinstance(label_term, Literal) else _local_name(str(iri))
    return kind, class_curie, label


def trace(store: TripleStore, target: str) -> ProvenanceGraph:
    """Backward closure from a target along the provenance relations."""
    start = Iri(target)
    if not store.match(s=start) and not store.match(o=start):
        raise UnknownInstanceError(f"{target} does not occur in the store")

    visited: set[Iri] = set()
    frontier = [start]
    while frontier:
        node = frontier.pop()
        if node in visited:
            continue
        visited.add(node)
        for t in store.match(s=node):
            if t.p in TRACE_RELATIONS and isinstance(t.o, Iri) and t.o not in visited:
                frontier.append(t.o)

    edges = sorted(
        ProvEdge(src=str(t.s), dst=str(t.o), relation=TRACE_RELATIONS[t.p])
        for t in store
        if t.p in TRACE_RELATIONS and t.s in visited and isinstance(t.o, Iri) and t.o in visited
    )
    _ensure_acyclic([(e.src, e.dst) for e in edges], CyclicProvenanceError)

    nodes = []
    for iri in sorted(visited):
        kind, class_curie, label = _classify(store, iri)
        nodes.append(ProvNode(iri=str(iri), node_kind=kind, class_curie=class_curie, label=label))
    warnings = []
    if not any(e.src == str(start) for e in edges):
        warnings.append("target has no provenance edges")
    return ProvenanceGraph(target=str(start), nodes=nodes, edges=edges, warnings=warnings)


def _ensure_acyclic(edges: list[tuple[str, str]], exc_type: type[Exception]) -> None:
    out: dict[str, list[str]] = {}
    indeg: dict[str, int] = {}
    nodes = set()
    for src, dst in edges:
        out.setdefault(src, []).append(dst)
        indeg[dst] = indeg.get(dst, 0) + 1
        nodes.add(src)
        nodes.add(dst)
    queue = sorted(n for n in nodes if indeg.get(n, 0) == 0)
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for m in out.get(n, ()):
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    if seen != len(nodes):
        raise exc_type("provenance relation contains a directed cycle")


def to_dot(pg: ProvenanceGraph) -> str:
    """Deterministic DOT rendering: nodes sorted by IRI, shape by node kind."""
    lines = ["digraph provenance {", "  rankdir=BT;"]
    for n in sorted(pg.nodes, key=lambda n: n.iri):
        label = n.label.replace("\\", "\\\\").replace('"', '\\"')
        cls = n.class_curie or "?"
        lines.append(
            f'  "{n.iri}" [shape={_NODE_SHAPES[n.node_kind]}, label="{label}\\n{cls}"];'
        )
    for e in sorted(pg.edges, key=lambda e: (e.src, e.dst, e.relation)):
        lines.append(f'  "{e.src}" -> "{e.dst}" [label="{e.relation}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def subgraph_store(pg: ProvenanceGraph, store: TripleStore) -> TripleStore:
    """Provenance subgraph as its own store (type + label + provenance edges)."""
    out = TripleStore()
    triples = []
    rdf_type = Iri(PREFIXES["rdf"] + "type")
    for n in pg.nodes:
        for t in store.match(s=Iri(n.iri), p=rdf_type):
            triples.append(t)
        for t in store.match(s=Iri(n.iri), p=RDFS_LABEL):
            triples.append(t)
    rel_by_name = {name: iri for iri, name in TRACE_RELATIONS.items()}
    for e in pg.edges:
        triples.append(Triple(Iri(e.src), rel_by_name[e.relation], Iri(e.dst)))
    out.add_triples(triples)
    return out


# --- structural equivalence ---------------------------------------------------


@dataclass(frozen=True)
class WorkflowSignature:
    level: str
    text: str

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()[:16]


def _abstract_label(class_curie: str | None, level: str) -> str:
    if class_curie is None:
        return "?"
    if level == "concrete":
        return class_curie
    chain = superclass_chain(class_curie)
    # highest registered superclass strictly below the provenance root
    return chain[-2] if len(chain) >= 2 else chain[0]


def _encode_with_order(order: list[str], labels: dict[str, str], edges: list[tuple[str, str, str]]) -> str:
    pos = {n: i for i, n in enumerate(order)}
    node_part = ",".join(labels[n] for n in order)
    edge_part = ";".join(
        f"{pos[s]}-{rel}->{pos[d]}" for s, rel, d in sorted(edges, key=lambda e: (pos[e[0]], e[1], pos[e[2]]))
    )
    return f"nodes[{node_part}]edges[{edge_part}]"


def _partition(nodes: list[str], colors: dict[str, str]) -> list[tuple[str, ...]]:
    groups: dict[str, list[str]] = {}
    for n in nodes:
        groups.setdefault(colors[n], []).append(n)
    return sorted(tuple(sorted(g)) for g in groups.values())


def _refine(nodes: list[str], colors: dict[str, str], edges: list[tuple[str, str, str]]) -> dict[str, str]:
    """Iterative color refinement over the labeled digraph.

    New colors are canonical palette indices of (color, out-signature,
    in-signature) tuples, so isomorphic graphs refine to matching colors.
    """
    while True:
        raw = {}
        for n in nodes:
            outs = tuple(sorted((rel, colors[d]) for s, rel, d in edges if s == n))
            ins = tuple(sorted((rel, colors[s]) for s, rel, d in edges if d == n))
            raw[n] = (colors[n], outs, ins)
        palette = {sig: i for i, sig in enumerate(sorted(set(raw.values())))}
        new = {n: f"c{palette[raw[n]]:06d}" for n in nodes}
        if _partition(nodes, new) == _partition(nodes, colors):
            return colors
        colors = new


def _canonical_encoding(nodes: list[str], labels: dict[str, str], edges: list[tuple[str, str, str]]) -> str:
    """Minimal encoding over all refinement-compatible orders (backtracking)."""
    best: list[str] = []

    def search(colors: dict[str, str]) -> None:
        colors = _refine(nodes, colors, edges)
        groups: dict[str, list[str]] = {}
        for n in nodes:
            groups.setdefault(colors[n], []).append(n)
        ambiguous = sorted((c, sorted(ns)) for c, ns in groups.items() if len(ns) > 1)
        if not ambiguous:
            order = sorted(nodes, key=lambda n: (colors[n], labels[n]))
            enc = _encode_with_order(order, labels, edges)
            if not best or enc < best[0]:
                best[:] = [enc]
            return
        _color, members = ambiguous[0]
        for pick in members:
            branched = dict(colors)
            branched[pick] = "!" + colors[pick]
            search(branched)

    search({n: labels[n] for n in nodes})
    return best[0]


def workflow_signature(pg: ProvenanceGraph, level: str = "concrete") -> WorkflowSignature:
    """Canonical signature of the provenance DAG at an abstraction level.

    Equal signatures imply (and are implied by) a label-preserving DAG
    isomorphism at that level.
    """
    if level not in ("concrete", "method_superclass"):
        raise ValueError(f"unknown abstraction level: {level!r}")
    edge_pairs = [(e.src, e.dst) for e in pg.edges]
    _ensure_acyclic(edge_pairs, NotADagError)
    nodes = sorted(n.iri for n in pg.nodes)
    labels = {n.iri: _abstract_label(n.class_curie, level) for n in pg.nodes}
    edges = [(e.src, e.relation, e.dst) for e in pg.edges]
    return WorkflowSignature(level=level, text=_canonical_encoding(nodes, labels, edges))
