"""Typed, validated domain models: the only path between templates and the graph.

``bind_models`` turns a validated template document into a ModelBundle of
sample, activity, and math-operation models. Document-local ids are rewritten
to freshly minted UUID IRIs (or kept when the id is already IRI-shaped, which
is how at-source capture pre-assigns identifiers). References to IRIs that
are not defined in the document are permitted when they can be resolved in an
existing graph, so incremental ingestion works across documents.

Math-operation output values are computed here, during binding: the template
records the operation and its operands, not the result.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import DanglingReferenceError, InternalInconsistencyError
from .graph.identifiers import IriMinter
from .graph.store import Iri, Literal, TripleStore
from .registry import PREFIXES, resolve_term, superclass_chain, unit_by_iri, unit_lookup
from .structfile import read_structure_json
from .templates import (
    METHOD_CURIES,
    PROPERTY_NAMES,
    PositionsRef,
    ProvenanceInfo,
    Quantity,
    SoftwareSpec,
    TemplateDocument,
    ValidationIssue,
    expand_ref,
    is_iri_ref,
)

# Required unit symbol per controlled property name.
PROPERTY_UNITS = {
    "total_energy": "EV",
    "potential_energy": "EV",
    "formation_energy": "EV",
    "segregation_energy": "EV",
    "scaled_energy": "EV",
    "energy_difference": "EV",
    "volume_per_atom": "ANGSTROM3",
    "grain_boundary_energy": "J-PER-M2",
    "work_of_separation": "J-PER-M2",
    "bulk_modulus": "GigaPA",
    "thermal_expansion_coefficient": "PER-K",
}

ASMO = PREFIXES["asmo"]
HAS_VALUE = Iri(ASMO + "hasValue")
HAS_UNIT = Iri(ASMO + "hasUnit")
IS_PROPERTY_OF = Iri(ASMO + "isCalculatedPropertyOf")


@dataclass
class CellModel:
    vectors: list[list[float]]
    pbc: list[bool]
    volume: float


@dataclass
class CrystalModel:
    name: str
    space_group: int
    lattice_parameter: Quantity


@dataclass
class DefectModel:
    kind: str
    site_species: str | None = None
    guest_species: str | None = None
    sigma: int | None = None
    misorientation_angle: Quantity | None = None
    tilt_axis: tuple[int, int, int] | None = None
    gb_plane: tuple[int, int, int] | None = None


@dataclass
class AtomicScaleSample:
    iri: str
    label: str
    composition: list[tuple[str, int]]
    n_atoms: int
    cell: CellModel | None = None
    positions: list[tuple[str, tuple[float, float, float]]] | None = None
    crystal: CrystalModel | None = None
    defects: list[DefectModel] = field(default_factory=list)
    provenance_source: ProvenanceInfo | None = None
    derived_from: list[str] = field(default_factory=list)
    record_digest: str | None = None


@dataclass
class PotentialModel:
    label: str
    kind: str
    reference_uri: str | None = None
    parameter_file: str | None = None


@dataclass
class CalculatedPropertyModel:
    iri: str
    name: str
    value: float
    unit: str
    sample_iri: str | None
    generated_by: str


@dataclass
class SimulationActivity:
    iri: str
    method_curie: str
    software: SoftwareSpec
    ensemble: str = "none"
    parameters: dict[str, Quantity] = field(default_factory=dict)
    xc_functional: str | None = None
    potential: PotentialModel | None = None
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    properties: list[CalculatedPropertyModel] = field(default_factory=list)
    record_digest: str | None = None


@dataclass
class OperandRef:
    """Math-operation operand: an IRI link, a literal value, or both resolved."""
    iri: str | None = None
    value: float | None = None


@dataclass
class MathOperationModel:
    iri: str
    op_kind: str
    output: CalculatedPropertyModel
    input_refs: list[OperandRef] = field(default_factory=list)
    series: list[tuple[float, OperandRef]] = field(default_factory=list)
    scalar: float | None = None


@dataclass
class ModelBundle:
    samples: list[AtomicScaleSample] = field(default_factory=list)
    activities: list[SimulationActivity] = field(default_factory=list)
    math_ops: list[MathOperationModel] = field(default_factory=list)
    external_refs: set[str] = field(default_factory=set)

    def all_iris(self) -> list[str]:
        out = [s.iri for s in self.samples] + [a.iri for a in self.activities]
        for a in self.activities:
            out.extend(p.iri for p in a.properties)
        for op in self.math_ops:
            out.append(op.iri)
            out.append(op.output.iri)
        return out


def _det3(v: list[list[float]]) -> float:
    return (
        v[0][0] * (v[1][1] * v[2][2] - v[1][2] * v[2][1])
        - v[0][1] * (v[1][0] * v[2][2] - v[1][2] * v[2][0])
        + v[0][2] * (v[1][0] * v[2][1] - v[1][1] * v[2][0])
    )


def _slope(points: list[tuple[float, float]]) -> float:
    n = len(points)
    mx = sum(x for x, _ in points) / n
    my = sum(y for _, y in points) / n
    sxx = sum((x - mx) ** 2 for x, _ in points)
    if sxx == 0.0:
        raise InternalInconsistencyError("linear_fit series has degenerate x values")
    sxy = sum((x - mx) * (y - my) for x, y in points)
    return sxy / sxx


class _ExternalLookup:
    """Resolves property values and sample links for IRIs already in a graph."""

    def __init__(self, store: TripleStore | None):
        self.store = store

    def property_value(self, iri: str) -> float:
        if self.store is None:
            raise DanglingReferenceError(f"{iri} is not defined in the document and no graph was given")
        val = self.store.value(Iri(iri), HAS_VALUE)
        if not isinstance(val, Literal) or not val.is_numeric:
            raise DanglingReferenceError(f"{iri} has no numeric value in the graph")
        return float(val.value)

    def property_sample(self, iri: str) -> str | None:
        if self.store is None:
            return None
        val = self.store.value(Iri(iri), IS_PROPERTY_OF)
        return str(val) if isinstance(val, Iri) else None


def bind_models(
    doc: TemplateDocument,
    store: TripleStore | None = None,
    minter: IriMinter | None = None,
    base_dir: str | Path | None = None,
) -> ModelBundle:
    """Bind a validated document to typed models with minted IRIs.

    ``store`` resolves references to instances that live in an existing
    graph; ``minter`` makes IRI assignment reproducible; ``base_dir``
    anchors positions file references.
    """
    minter = minter or IriMinter()
    external: set[str] = set()
    lookup = _ExternalLookup(store)

    def resolve_id(section_id: str | None, kind: str) -> str:
        if section_id is not None and is_iri_ref(section_id):
            return expand_ref(section_id)
        return str(minter.mint(kind))

    sample_iris: dict[str, str] = {}
    for s in doc.samples:
        iri = resolve_id(s.id, "sample")
        if s.id is not None:
            sample_iris[s.id] = iri

    def sample_ref_iri(ref: str, context: str) -> str:
        if ref in sample_iris:
            return sample_iris[ref]
        if is_iri_ref(ref):
            iri = expand_ref(ref)
            external.add(iri)
            return iri
        raise DanglingReferenceError(f"{context}: sample id {ref!r} is not defined in the document")

    samples: list[AtomicScaleSample] = []
    for s in doc.samples:
        iri = sample_iris[s.id] if s.id is not None else resolve_id(None, "sample")
        positions = None
        if isinstance(s.positions, PositionsRef):
            if base_dir is None:
                raise InternalInconsistencyError(
                    f"sample {s.label!r} references positions file {s.positions.path!r} but no base directory was given"
                )
            data = read_structure_json(Path(base_dir) / s.positions.path)
            coords = data.get("positions")
            if coords is None:
                raise InternalInconsistencyError(f"{s.positions.path}: structure file has no positions")
            positions = [
                (sp, (float(x), float(y), float(z)))
                for sp, (x, y, z) in zip(data["species"], coords)
            ]
        elif s.positions is not None:
            positions = [(el, (float(x), float(y), float(z))) for el, (x, y, z) in s.positions]
        cell = None
        if s.cell is not None:
            cell = CellModel(
                vectors=[list(map(float, row)) for row in s.cell.vectors],
                pbc=list(s.cell.pbc),
                volume=abs(_det3(s.cell.vectors)),
            )
        crystal = None
        if s.crystal_structure is not None:
            crystal = CrystalModel(
                name=s.crystal_structure.name,
                space_group=s.crystal_structure.space_group,
                lattice_parameter=Quantity(s.crystal_structure.lattice_parameter.value, s.crystal_structure.lattice_parameter.unit),
            )
        samples.append(
            AtomicScaleSample(
                iri=iri,
                label=s.label,
                composition=sorted((el, int(n)) for el, n in s.composition),
                n_atoms=sum(n for _, n in s.composition),
                cell=cell,
                positions=positions,
                crystal=crystal,
                defects=[
                    DefectModel(
                        kind=d.kind,
                        site_species=d.site_species,
                        guest_species=d.guest_species,
                        sigma=d.sigma,
                        misorientation_angle=Quantity(d.misorientation_angle.value, d.misorientation_angle.unit)
                        if d.misorientation_angle
                        else None,
                        tilt_axis=d.tilt_axis,
                        gb_plane=d.gb_plane,
                    )
                    for d in s.defects
                ],
                provenance_source=s.provenance,
                derived_from=sorted(sample_ref_iri(r, f"sample {s.label!r} derived_from") for r in s.derived_from),
                record_digest=s.record_digest,
            )
        )
    # rebuild the id map including anonymous samples resolved above
    sample_by_iri = {m.iri: m for m in samples}

    activities: list[SimulationActivity] = []
    property_models: dict[str, CalculatedPropertyModel] = {}  # id -> model
    for wf in doc.workflows:
        a_iri = resolve_id(wf.id, "activity")
        params: dict[str, Quantity] = {}
        p = wf.parameters
        for key in ("temperature", "pressure", "energy_cutoff", "convergence_force"):
            q = getattr(p, key)
            if q is not None:
                params[key] = Quantity(q.value, q.unit)
        for name, q in p.extra.items():
            params[name] = Quantity(q.value, q.unit)
        props = []
        for cp in wf.calculated_properties:
            p_iri = resolve_id(cp.id, "property")
            model = CalculatedPropertyModel(
                iri=p_iri,
                name=cp.name,
                value=float(cp.value),
                unit=cp.unit,
                sample_iri=sample_ref_iri(cp.sample_ref, f"property {cp.name!r}"),
                generated_by=a_iri,
            )
            props.append(model)
            if cp.id is not None:
                property_models[cp.id] = model
        activities.append(
            SimulationActivity(
                iri=a_iri,
                method_curie=METHOD_CURIES.get(wf.method, wf.method),
                ensemble=p.ensemble,
                parameters=params,
                xc_functional=p.xc_functional,
                software=SoftwareSpec(wf.software.name, wf.software.version),
                potential=PotentialModel(wf.potential.label, wf.potential.kind, wf.potential.reference_uri)
                if wf.potential
                else None,
                inputs=sorted(sample_ref_iri(r, f"workflow inputs") for r in wf.input_samples),
                outputs=sorted(sample_ref_iri(r, f"workflow outputs") for r in wf.output_samples),
                properties=sorted(props, key=lambda m: m.iri),
                record_digest=wf.record_digest,
            )
        )

    # math operations may reference each other's outputs; bind in dependency order
    op_by_id = {op.id: op for op in doc.math_operations if op.id is not None}
    op_models: dict[int, MathOperationModel] = {}
    op_output_by_id: dict[str, CalculatedPropertyModel] = {}
    visiting: set[str] = set()

    def resolve_operand(ref: str, context: str) -> OperandRef:
        if ref in property_models:
            m = property_models[ref]
            return OperandRef(iri=m.iri, value=m.value)
        if ref in op_by_id:
            if ref in visiting:
                raise InternalInconsistencyError(f"math operations form a reference cycle through {ref!r}")
            target = doc.math_operations.index(op_by_id[ref])
            if target not in op_models:
                bind_op(target)
            m = op_models[target].output
            return OperandRef(iri=m.iri, value=m.value)
        if is_iri_ref(ref):
            iri = expand_ref(ref)
            external.add(iri)
            return OperandRef(iri=iri, value=lookup.property_value(iri))
        raise DanglingReferenceError(f"{context}: property id {ref!r} is not defined in the document")

    def operand_sample(ref: OperandRef) -> str | None:
        if ref.iri is None:
            return None
        for m in property_models.values():
            if m.iri == ref.iri:
                return m.sample_iri
        for om in op_models.values():
            if om.output.iri == ref.iri:
                return om.output.sample_iri
        return lookup.property_sample(ref.iri)

    def bind_op(index: int) -> None:
        op = doc.math_operations[index]
        if op.id is not None:
            visiting.add(op.id)
        context = f"math operation {op.id or index}"
        operands: list[OperandRef] = []
        series: list[tuple[float, OperandRef]] = []
        if op.op == "linear_fit":
            for pt in op.series:
                if pt.y.ref is not None:
                    series.append((float(pt.x), resolve_operand(pt.y.ref, context)))
                else:
                    series.append((float(pt.x), OperandRef(value=float(pt.y.value))))
            value = _slope([(x, r.value) for x, r in series])
        else:
            for v in op.inputs:
                if v.ref is not None:
                    operands.append(resolve_operand(v.ref, context))
                else:
                    operands.append(OperandRef(value=float(v.value)))
            vals = [r.value for r in operands]
            if op.op == "difference":
                value = vals[0] - vals[1]
            elif op.op == "scale":
                value = vals[0] * float(op.scalar)
            elif op.op == "divide":
                if vals[1] == 0.0:
                    raise InternalInconsistencyError(f"{context}: division by zero")
                value = vals[0] / vals[1]
            else:  # pragma: no cover - parse restricts op kinds
                raise InternalInconsistencyError(f"unknown op kind {op.op!r}")
        o_iri = resolve_id(op.id, "operation")
        first_sample = None
        for r in operands + [r for _, r in series]:
            if r.iri is not None:
                first_sample = operand_sample(r)
                break
        out_model = CalculatedPropertyModel(
            iri=resolve_id(None, "property"),
            name=op.output.name,
            value=value,
            unit=op.output.unit,
            sample_iri=first_sample,
            generated_by=o_iri,
        )
        op_models[index] = MathOperationModel(
            iri=o_iri,
            op_kind=op.op,
            input_refs=operands,
            series=series,
            scalar=op.scalar,
            output=out_model,
        )
        if op.id is not None:
            visiting.discard(op.id)
            op_output_by_id[op.id] = out_model

    for i in range(len(doc.math_operations)):
        if i not in op_models:
            bind_op(i)

    bundle = ModelBundle(
        samples=samples,
        activities=activities,
        math_ops=[op_models[i] for i in range(len(doc.math_operations))],
        external_refs=external,
    )
    # internal consistency: each activity's sample links must be known somewhere
    known = {m.iri for m in samples} | external
    for a in bundle.activities:
        for ref in a.inputs + a.outputs:
            if ref not in known:
                raise InternalInconsistencyError(f"activity {a.iri} references unknown sample {ref}")
    del sample_by_iri
    return bundle


def check_consistency(bundle: ModelBundle) -> list[ValidationIssue]:
    """Cross-object checks on a bound bundle; empty report means consistent."""
    issues: list[ValidationIssue] = []
    sample_iris = {s.iri for s in bundle.samples}

    for s in bundle.samples:
        path = f"sample:{s.iri}"
        if s.n_atoms != sum(n for _, n in s.composition):
            issues.append(
                ValidationIssue("E_ELEMENT", path, f"n_atoms {s.n_atoms} != composition sum {sum(n for _, n in s.composition)}")
            )
        if s.positions is not None and len(s.positions) != s.n_atoms:
            issues.append(ValidationIssue("E_ELEMENT", path, f"{len(s.positions)} positions for {s.n_atoms} atoms"))
        if s.cell is not None:
            det = abs(_det3(s.cell.vectors))
            if det == 0.0:
                issues.append(ValidationIssue("E_CELL", path, "cell determinant is zero"))
            elif abs(s.cell.volume - det) > 1e-8 * det:
                issues.append(
                    ValidationIssue("E_CELL", path, f"declared volume {s.cell.volume!r} disagrees with |det| {det!r}")
                )

    def check_property(p: CalculatedPropertyModel, path: str) -> None:
        if p.name not in PROPERTY_NAMES:
            issues.append(ValidationIssue("E_UNIT", path, f"unknown property name {p.name!r}"))
            return
        expected = PROPERTY_UNITS[p.name]
        if p.unit != expected:
            issues.append(ValidationIssue("E_UNIT", path, f"{p.name} requires unit {expected}, got {p.unit}"))
        if p.sample_iri is not None and p.sample_iri not in sample_iris and p.sample_iri not in bundle.external_refs:
            issues.append(ValidationIssue("E_REF", path, f"property sample {p.sample_iri} is not in the bundle"))

    for a in bundle.activities:
        path = f"activity:{a.iri}"
        try:
            chain = superclass_chain(a.method_curie)
            if "prov:Activity" not in chain:
                issues.append(ValidationIssue("E_METHOD", path, f"{a.method_curie} is not a simulation activity class"))
        except Exception:
            issues.append(ValidationIssue("E_METHOD", path, f"unresolvable method {a.method_curie!r}"))
        for name, q in a.parameters.items():
            try:
                unit_lookup(q.unit)
            except Exception:
                issues.append(ValidationIssue("E_UNIT", f"{path}.parameters.{name}", f"unknown unit {q.unit!r}"))
        for ref in a.inputs + a.outputs:
            if ref not in sample_iris and ref not in bundle.external_refs:
                issues.append(ValidationIssue("E_REF", path, f"sample {ref} neither bound nor external"))
        for p in a.properties:
            check_property(p, f"{path}.property:{p.iri}")
            if p.generated_by != a.iri:
                issues.append(ValidationIssue("E_REF", f"{path}.property:{p.iri}", "generated_by does not point at its activity"))

    arity = {"difference": 2, "scale": 1, "divide": 2}
    for op in bundle.math_ops:
        path = f"operation:{op.iri}"
        if op.op_kind in arity and len(op.input_refs) != arity[op.op_kind]:
            issues.append(ValidationIssue("E_REF", path, f"{op.op_kind} takes {arity[op.op_kind]} inputs, got {len(op.input_refs)}"))
        if op.op_kind == "scale" and op.scalar is None:
            issues.append(ValidationIssue("E_REF", path, "scale requires a scalar"))
        if op.op_kind == "linear_fit" and len(op.series) < 2:
            issues.append(ValidationIssue("E_REF", path, "linear_fit requires at least 2 points"))
        check_property(op.output, f"{path}.output")
        if op.output.generated_by != op.iri:
            issues.append(ValidationIssue("E_REF", path, "output generated_by does not point at its operation"))

    return issues


def method_chain_root_ok(method_curie: str) -> bool:
    try:
        rec = resolve_term(method_curie)
    except Exception:
        return False
    return rec.kind == "class"


def unit_symbol_for_iri(iri: str) -> str | None:
    rec = unit_by_iri(iri)
    return rec.symbol if rec else None
