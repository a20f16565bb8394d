"""Normalization of external records into template documents.

Two ingestion paths mirror how published simulation data actually arrives:
extended-XYZ structure files (one sample per frame) and tabular property
datasets (CSV with a column mapping, one document per row). Both attach a
record digest so re-ingesting the same data into a store is a no-op: the
digest keys on (source DOI, canonical row/frame content), and structure
identity is already deduplicated by the content-addressed structure hash.
"""
from __future__ import annotations

import csv
import hashlib
import io
import re
import warnings
from dataclasses import dataclass, field

from .errors import (
    BadLatticeError,
    CountMismatchError,
    HeaderMismatchError,
    ParseError,
    RowError,
    SchemaError,
    UnknownElementError,
)
from .graph.identifiers import IriMinter, canonical_structure_text
from .graph.store import Iri, Literal, TripleStore
from .models import bind_models, check_consistency
from .registry import PREFIXES, unit_lookup
from .templates import (
    METHODS,
    PERIODIC_TABLE,
    CalculatedPropertySpec,
    CellSpec,
    DefectSpec,
    PotentialSpec,
    ProvenanceInfo,
    Quantity,
    SampleSection,
    SoftwareSpec,
    TemplateDocument,
    WorkflowSection,
    parse_template,
    validate_template,
)
from .graph import convert

_LATTICE_RE = re.compile(r'Lattice="([^"]*)"')
_PBC_RE = re.compile(r'pbc="([^"]*)"')
_KEY_RE = re.compile(r'([A-Za-z_][A-Za-z0-9_]*)=(?:"[^"]*"|\S+)')


def parse_extxyz(text: str) -> list[SampleSection]:
    """Parse extended-XYZ frames into sample sections.

    Supported comment-line keys: ``Lattice`` (nine decimals, row vectors)
    and ``pbc`` ("T T T" style). Other keys are ignored with a warning.
    Atom lines are ``symbol x y z``; extra per-atom columns are ignored.
    """
    lines = text.splitlines()
    samples: list[SampleSection] = []
    i = 0
    frame = 0
    ignored_keys: set[str] = set()
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        try:
            count = int(lines[i].strip())
        except ValueError:
            raise ParseError(f"expected atom count, got {lines[i].strip()!r}", i + 1)
        if i + 1 >= len(lines):
            raise CountMismatchError(f"frame {frame}: missing comment line after count")
        comment = lines[i + 1]
        m = _LATTICE_RE.search(comment)
        if not m:
            raise BadLatticeError(f"frame {frame}: comment line has no Lattice entry")
        try:
            values = [float(x) for x in m.group(1).split()]
        except ValueError:
            values = []
        if len(values) != 9:
            raise BadLatticeError(f"frame {frame}: Lattice must contain 9 decimals")
        vectors = [values[0:3], values[3:6], values[6:9]]
        pbc = [True, True, True]
        pm = _PBC_RE.search(comment)
        if pm:
            flags = pm.group(1).split()
            if len(flags) != 3 or any(f not in ("T", "F") for f in flags):
                raise BadLatticeError(f"frame {frame}: pbc must be three T/F flags")
            pbc = [f == "T" for f in flags]
        for key_match in _KEY_RE.finditer(comment):
            key = key_match.group(1)
            if key not in ("Lattice", "pbc"):
                ignored_keys.add(key)
        positions = []
        for j in range(count):
            lineno = i + 2 + j
            if lineno >= len(lines) or not lines[lineno].strip() or _looks_like_count(lines[lineno]):
                raise CountMismatchError(
                    f"frame {frame} declares {count} atoms but only {j} atom lines found"
                )
            fields = lines[lineno].split()
            if len(fields) < 4:
                raise ParseError("atom line needs symbol and three coordinates", lineno + 1)
            symbol = fields[0]
            if symbol not in PERIODIC_TABLE:
                raise UnknownElementError(f"line {lineno + 1}: unknown element symbol {symbol!r}")
            try:
                xyz = (float(fields[1]), float(fields[2]), float(fields[3]))
            except ValueError:
                raise ParseError("unparsable coordinates", lineno + 1)
            positions.append((symbol, xyz))
        counts: dict[str, int] = {}
        for el, _ in positions:
            counts[el] = counts.get(el, 0) + 1
        samples.append(
            SampleSection(
                label=f"frame-{frame}",
                composition=sorted(counts.items()),
                cell=CellSpec(vectors=vectors, pbc=pbc),
                positions=positions,
            )
        )
        i += 2 + count
        frame += 1
    if ignored_keys:
        warnings.warn(f"extxyz: ignored comment keys: {', '.join(sorted(ignored_keys))}")
    return samples


def _looks_like_count(line: str) -> bool:
    parts = line.split()
    return len(parts) == 1 and parts[0].isdigit()


def structures_to_documents(
    samples: list[SampleSection], doi: str | None = None, dataset: str | None = None
) -> list[TemplateDocument]:
    """One document per frame, with dedup digests over (DOI, canonical frame)."""
    docs = []
    for s in samples:
        canonical = canonical_structure_text(
            s.composition,
            s.cell.vectors if s.cell else None,
            s.cell.pbc if s.cell else None,
            s.positions if isinstance(s.positions, list) else None,
        )
        digest = hashlib.sha256(f"{doi or ''}|{canonical}".encode()).hexdigest()
        section = SampleSection(
            label=s.label,
            composition=s.composition,
            cell=s.cell,
            positions=s.positions,
            provenance=ProvenanceInfo(doi=doi, dataset=dataset) if (doi or dataset) else None,
            record_digest=digest,
        )
        docs.append(TemplateDocument(samples=[section]))
    return docs


# --- tabular ingestion -----------------------------------------------------------


_COLUMN_TARGETS = (
    "composition[0].element",
    "defects[0].sigma",
    "defects[0].misorientation_angle",
    "defects[0].tilt_axis",
    "defects[0].gb_plane",
    "label",
    "workflow.method",
    "property",
)


@dataclass
class ColumnTarget:
    path: str
    name: str | None = None  # controlled property name, for path == "property"
    unit: str | None = None


@dataclass
class ColumnMapping:
    columns: dict[str, ColumnTarget]
    method: str | None = None
    software: SoftwareSpec | None = None
    potential: PotentialSpec | None = None
    doi: str | None = None
    dataset: str | None = None
    label_prefix: str | None = None
    constants: dict[str, str] = field(default_factory=dict)


def parse_mapping(text: str, format: str = "yaml") -> ColumnMapping:
    """Parse and validate a column-mapping file (same YAML/JSON subset)."""
    import json as _json

    import yaml as _yaml

    data = _yaml.safe_load(text) if format == "yaml" else _json.loads(text)
    if not isinstance(data, dict):
        raise SchemaError("$", "mapping must be a map")
    for key in data:
        if key not in ("columns", "constants"):
            raise SchemaError(f"$.{key}", "unknown key")
    columns: dict[str, ColumnTarget] = {}
    for col, spec in (data.get("columns") or {}).items():
        path = f"$.columns.{col}"
        if not isinstance(spec, dict) or "target" not in spec:
            raise SchemaError(path, "column entry needs a target")
        target = spec["target"]
        if target not in _COLUMN_TARGETS:
            raise SchemaError(f"{path}.target", f"unknown target path {target!r}")
        name = spec.get("name")
        unit = spec.get("unit")
        if target == "property":
            if not name or not unit:
                raise SchemaError(path, "property columns need name and unit")
            unit_lookup(unit)
        if target == "defects[0].misorientation_angle":
            unit = unit or "DEG"
            unit_lookup(unit)
        columns[col] = ColumnTarget(path=target, name=name, unit=unit)
    consts = data.get("constants") or {}
    method = consts.get("method")
    if method is not None and method not in METHODS:
        raise SchemaError("$.constants.method", f"unknown method {method!r}")
    software = None
    if "software" in consts:
        software = SoftwareSpec(name=consts["software"]["name"], version=str(consts["software"]["version"]))
    potential = None
    if "potential" in consts:
        p = consts["potential"]
        potential = PotentialSpec(label=p["label"], kind=p.get("kind", "classical"), reference_uri=p.get("reference_uri"))
    if method is None and not any(t.path == "workflow.method" for t in columns.values()):
        raise SchemaError("$.constants.method", "mapping must provide a method (constant or column)")
    if software is None:
        raise SchemaError("$.constants.software", "mapping must provide software {name, version}")
    return ColumnMapping(
        columns=columns,
        method=method,
        software=software,
        potential=potential,
        doi=consts.get("doi"),
        dataset=consts.get("dataset"),
        label_prefix=consts.get("label_prefix"),
    )


def _int_triple(text: str) -> tuple[int, int, int]:
    parts = text.replace(",", " ").split()
    return tuple(int(p) for p in parts)  # type: ignore[return-value]


def ingest_table(csv_text: str, mapping: ColumnMapping) -> list[TemplateDocument]:
    """One validated document per CSV data row; constants apply to all rows."""
    reader = csv.reader(io.StringIO(csv_text))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise HeaderMismatchError("CSV has no header row")
    header = [h.strip() for h in rows[0]]
    missing = [col for col in mapping.columns if col not in header]
    if missing:
        raise HeaderMismatchError(f"CSV header is missing mapped columns: {', '.join(missing)}")
    index = {col: header.index(col) for col in mapping.columns}

    docs = []
    for rownum, row in enumerate(rows[1:]):
        element = None
        method = mapping.method
        label = None
        defect = DefectSpec(kind="grain_boundary")
        has_defect = False
        properties: list[CalculatedPropertySpec] = []
        try:
            for col, target in mapping.columns.items():
                cell = row[index[col]].strip()
                if target.path == "composition[0].element":
                    element = cell
                elif target.path == "workflow.method":
                    method = cell
                elif target.path == "label":
                    label = cell
                elif target.path == "defects[0].sigma":
                    has_defect = True
                    defect.sigma = int(cell)
                elif target.path == "defects[0].misorientation_angle":
                    has_defect = True
                    defect.misorientation_angle = Quantity(float(cell), target.unit or "DEG")
                elif target.path == "defects[0].tilt_axis":
                    has_defect = True
                    defect.tilt_axis = _int_triple(cell)
                elif target.path == "defects[0].gb_plane":
                    has_defect = True
                    defect.gb_plane = _int_triple(cell)
                elif target.path == "property":
                    properties.append(
                        CalculatedPropertySpec(
                            id=f"p{len(properties)}",
                            name=target.name or "",
                            value=float(cell),
                            unit=target.unit or "",
                            sample_ref="s0",
                        )
                    )
        except ValueError as exc:
            raise RowError(rownum, "E_DEFECT" if "sigma" in str(exc) or has_defect else "E_UNIT", str(exc))
        if element is None:
            raise RowError(rownum, "E_ELEMENT", "mapping produced no element for this row")
        canonical = ",".join(f"{h}={row[i].strip() if i < len(row) else ''}" for i, h in enumerate(header))
        digest = hashlib.sha256(f"{mapping.doi or ''}|{canonical}".encode()).hexdigest()
        provenance = None
        if mapping.doi or mapping.dataset:
            provenance = ProvenanceInfo(doi=mapping.doi, dataset=mapping.dataset)
        sample = SampleSection(
            id="s0",
            label=label
            or f"{mapping.label_prefix or mapping.dataset or 'record'} {element}"
            + (f" sigma{defect.sigma}" if defect.sigma is not None else "")
            + f" row{rownum}",
            composition=[(element, 1)],
            defects=[defect] if has_defect else [],
            provenance=provenance,
            record_digest=digest,
        )
        workflow = WorkflowSection(
            id="w0",
            method=method or "",
            input_samples=["s0"],
            software=mapping.software or SoftwareSpec("unknown", "0"),
            potential=mapping.potential,
            calculated_properties=properties,
            record_digest=digest,
        )
        doc = TemplateDocument(samples=[sample], workflows=[workflow])
        issues = validate_template(doc)
        if issues:
            first = issues[0]
            raise RowError(rownum, first.code, f"{first.path}: {first.message}")
        docs.append(doc)
    return docs


# --- store-level ingestion ----------------------------------------------------


@dataclass
class IngestStats:
    documents: int = 0
    skipped: int = 0
    triples_added: int = 0


HAS_RECORD_DIGEST = Iri(PREFIXES["cmso"] + "hasRecordDigest")


def _known_digests(doc: TemplateDocument) -> list[str]:
    out = [s.record_digest for s in doc.samples if s.record_digest]
    out += [w.record_digest for w in doc.workflows if w.record_digest]
    return out


def ingest_documents(
    store: TripleStore,
    docs: list[TemplateDocument],
    minter: IriMinter | None = None,
    base_dir=None,
) -> IngestStats:
    """Bind and serialize documents into a store with record-level dedup.

    A document whose record digest already appears in the store is skipped
    entirely: no new sample/activity/property IRIs are minted for it.
    """
    stats = IngestStats()
    minter = minter or IriMinter()
    for doc in docs:
        digests = _known_digests(doc)
        if digests and any(store.match(p=HAS_RECORD_DIGEST, o=Literal(d)) for d in digests):
            stats.skipped += 1
            continue
        bundle = bind_models(doc, store=store, minter=minter, base_dir=base_dir)
        issues = check_consistency(bundle)
        if issues:
            first = issues[0]
            raise RowError(stats.documents, first.code, f"{first.path}: {first.message}")
        stats.triples_added += convert.to_graph(bundle, store)
        stats.documents += 1
    return stats


def ingest_template_text(
    store: TripleStore,
    text: str,
    format: str = "yaml",
    lenient: bool = False,
    minter: IriMinter | None = None,
    base_dir=None,
) -> IngestStats:
    doc = parse_template(text, format=format, lenient=lenient)
    issues = validate_template(doc)
    if issues:
        first = issues[0]
        raise RowError(0, first.code, f"{first.path}: {first.message}")
    return ingest_documents(store, [doc], minter=minter, base_dir=base_dir)
