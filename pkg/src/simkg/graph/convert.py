"""Bidirectional conversion between domain models and RDF triples.

``to_graph`` serializes a consistent ModelBundle into a store following a
fixed emission table (documented in docs/emission.md): every model gets a
type triple, scalar fields become data-property triples, links become
object-property triples, and activities/operations additionally emit
provenance edges (used / wasGeneratedBy / wasDerivedFrom / wasAssociatedWith).

Child resources (species, cells, parameters, software, potentials, defects)
live at deterministic IRIs derived from their parent, so re-serializing the
same bundle is a no-op under set semantics.

``from_graph`` reconstructs a model from an instance IRI; the result equals
the originally serialized model up to canonical field ordering.
"""
from __future__ import annotations

import json

from ..errors import IncompleteInstanceError, UnknownInstanceError
from ..models import (
    AtomicScaleSample,
    CalculatedPropertyModel,
    CellModel,
    CrystalModel,
    DefectModel,
    MathOperationModel,
    ModelBundle,
    OperandRef,
    PotentialModel,
    SimulationActivity,
)
from ..registry import expand_curie, superclass_chain, term_by_iri, unit_by_iri, unit_lookup
from ..templates import ProvenanceInfo, Quantity, SoftwareSpec
from .identifiers import structure_hash
from .store import Iri, Literal, Triple, TripleStore


def _p(curie: str) -> Iri:
    return Iri(expand_curie(curie))


RDF_TYPE = _p("rdf:type")
RDFS_LABEL = _p("rdfs:label")
PROV_USED = _p("prov:used")
PROV_WAS_GENERATED_BY = _p("prov:wasGeneratedBy")
PROV_WAS_DERIVED_FROM = _p("prov:wasDerivedFrom")
PROV_WAS_ASSOCIATED_WITH = _p("prov:wasAssociatedWith")

HAS_STRUCTURE = _p("cmso:hasStructure")
HAS_SPECIES = _p("cmso:hasSpecies")
HAS_SIMULATION_CELL = _p("cmso:hasSimulationCell")
HAS_CRYSTAL_STRUCTURE = _p("cmso:hasCrystalStructure")
HAS_DEFECT = _p("cmso:hasDefect")
HAS_LATTICE_PARAMETER = _p("cmso:hasLatticeParameter")
HAS_MISORIENTATION_ANGLE = _p("cmso:hasMisorientationAngle")
HAS_NUMBER_OF_ATOMS = _p("cmso:hasNumberOfAtoms")
HAS_ELEMENT_SYMBOL = _p("cmso:hasElementSymbol")
HAS_ATOM_COUNT = _p("cmso:hasAtomCount")
HAS_VOLUME = _p("cmso:hasVolume")
HAS_CELL_VECTORS = _p("cmso:hasCellVectors")
HAS_PBC = _p("cmso:hasPeriodicBoundaryConditions")
HAS_ATOMIC_POSITIONS = _p("cmso:hasAtomicPositions")
HAS_SPACE_GROUP = _p("cmso:hasSpaceGroupNumber")
HAS_SIGMA = _p("cmso:hasSigmaValue")
HAS_TILT_AXIS = _p("cmso:hasTiltAxis")
HAS_GB_PLANE = _p("cmso:hasGBPlane")
HAS_SITE_SPECIES = _p("cmso:hasSiteSpecies")
HAS_GUEST_SPECIES = _p("cmso:hasGuestSpecies")
HAS_SOURCE_DOI = _p("cmso:hasSourceDOI")
HAS_SOURCE_DATASET = _p("cmso:hasSourceDataset")
HAS_SOURCE_AUTHOR = _p("cmso:hasSourceAuthor")
HAS_RECORD_DIGEST = _p("cmso:hasRecordDigest")

HAS_SIMULATION_PARAMETER = _p("asmo:hasSimulationParameter")
HAS_INTERATOMIC_POTENTIAL = _p("asmo:hasInteratomicPotential")
HAS_STATISTICAL_ENSEMBLE = _p("asmo:hasStatisticalEnsemble")
HAS_UNIT = _p("asmo:hasUnit")
IS_CALCULATED_PROPERTY_OF = _p("asmo:isCalculatedPropertyOf")
HAS_FIRST_OPERAND = _p("asmo:hasFirstOperand")
HAS_SECOND_OPERAND = _p("asmo:hasSecondOperand")
HAS_VALUE = _p("asmo:hasValue")
HAS_VERSION = _p("asmo:hasVersion")
HAS_POTENTIAL_KIND = _p("asmo:hasPotentialKind")
HAS_REFERENCE_URL = _p("asmo:hasReferenceURL")
HAS_XC_FUNCTIONAL = _p("asmo:hasExchangeCorrelationFunctional")
HAS_SCALAR_OPERAND = _p("asmo:hasScalarOperand")
HAS_SERIES_DATA = _p("asmo:hasSeriesData")
HAS_FIRST_OPERAND_VALUE = _p("asmo:hasFirstOperandValue")
HAS_SECOND_OPERAND_VALUE = _p("asmo:hasSecondOperandValue")

PROPERTY_CLASSES = {
    "total_energy": "asmo:TotalEnergy",
    "potential_energy": "asmo:PotentialEnergy",
    "formation_energy": "asmo:FormationEnergy",
    "grain_boundary_energy": "asmo:GrainBoundaryEnergy",
    "segregation_energy": "asmo:SegregationEnergy",
    "work_of_separation": "asmo:WorkOfSeparation",
    "volume_per_atom": "asmo:VolumePerAtom",
    "bulk_modulus": "asmo:BulkModulus",
    "scaled_energy": "asmo:ScaledEnergy",
    "energy_difference": "asmo:EnergyDifference",
    "thermal_expansion_coefficient": "asmo:ThermalExpansionCoefficient",
}
PROPERTY_NAMES_BY_CLASS = {v: k for k, v in PROPERTY_CLASSES.items()}

OP_CLASSES = {
    "difference": "asmo:DifferenceOperation",
    "scale": "asmo:ScalingOperation",
    "divide": "asmo:DivisionOperation",
    "linear_fit": "asmo:LinearFitOperation",
}
OP_KINDS_BY_CLASS = {v: k for k, v in OP_CLASSES.items()}

DEFECT_CLASSES = {
    "vacancy": "cmso:Vacancy",
    "substitutional": "cmso:SubstitutionalImpurity",
    "interstitial": "cmso:InterstitialImpurity",
    "grain_boundary": "cmso:GrainBoundary",
}
DEFECT_KINDS_BY_CLASS = {v: k for k, v in DEFECT_CLASSES.items()}


def _json(data) -> str:
    return json.dumps(data, separators=(",", ":"))


def _unit_iri(symbol: str) -> Iri:
    return Iri(unit_lookup(symbol).iri)


# --- emission ---------------------------------------------------------------


def _emit_quantity_node(out: list[Triple], node: Iri, q: Quantity) -> None:
    out.append(Triple(node, RDF_TYPE, _p("asmo:PhysicalQuantity")))
    out.append(Triple(node, HAS_VALUE, Literal(float(q.value))))
    out.append(Triple(node, HAS_UNIT, _unit_iri(q.unit)))


def sample_triples(m: AtomicScaleSample) -> list[Triple]:
    s = Iri(m.iri)
    out = [
        Triple(s, RDF_TYPE, _p("cmso:AtomicScaleSample")),
        Triple(s, RDFS_LABEL, Literal(m.label)),
        Triple(s, HAS_NUMBER_OF_ATOMS, Literal(int(m.n_atoms))),
    ]
    for el, n in sorted(m.composition):
        sp = Iri(f"{m.iri}/species/{el}")
        out.append(Triple(s, HAS_SPECIES, sp))
        out.append(Triple(sp, RDF_TYPE, _p("cmso:ChemicalSpecies")))
        out.append(Triple(sp, HAS_ELEMENT_SYMBOL, Literal(el)))
        out.append(Triple(sp, HAS_ATOM_COUNT, Literal(int(n))))
    if m.cell is not None:
        h = structure_hash(m)
        out.append(Triple(s, HAS_STRUCTURE, h))
        out.append(Triple(h, RDF_TYPE, _p("cmso:StructureRepresentation")))
        c = Iri(f"{m.iri}/cell")
        out.append(Triple(s, HAS_SIMULATION_CELL, c))
        out.append(Triple(c, RDF_TYPE, _p("cmso:SimulationCell")))
        out.append(Triple(c, HAS_VOLUME, Literal(float(m.cell.volume))))
        out.append(Triple(c, HAS_CELL_VECTORS, Literal(_json(m.cell.vectors))))
        out.append(Triple(c, HAS_PBC, Literal(_json(m.cell.pbc))))
    if m.positions is not None:
        payload = [[el, x, y, z] for el, (x, y, z) in m.positions]
        out.append(Triple(s, HAS_ATOMIC_POSITIONS, Literal(_json(payload))))
    if m.crystal is not None:
        cr = Iri(f"{m.iri}/crystal")
        out.append(Triple(s, HAS_CRYSTAL_STRUCTURE, cr))
        out.append(Triple(cr, RDF_TYPE, _p("cmso:CrystalStructure")))
        out.append(Triple(cr, RDFS_LABEL, Literal(m.crystal.name)))
        out.append(Triple(cr, HAS_SPACE_GROUP, Literal(int(m.crystal.space_group))))
        lp = Iri(f"{m.iri}/crystal/a")
        out.append(Triple(cr, HAS_LATTICE_PARAMETER, lp))
        _emit_quantity_node(out, lp, m.crystal.lattice_parameter)
    for i, d in enumerate(m.defects):
        dn = Iri(f"{m.iri}/defect/{i}")
        out.append(Triple(s, HAS_DEFECT, dn))
        out.append(Triple(dn, RDF_TYPE, _p(DEFECT_CLASSES[d.kind])))
        if d.site_species is not None:
            out.append(Triple(dn, HAS_SITE_SPECIES, Literal(d.site_species)))
        if d.guest_species is not None:
            out.append(Triple(dn, HAS_GUEST_SPECIES, Literal(d.guest_species)))
        if d.sigma is not None:
            out.append(Triple(dn, HAS_SIGMA, Literal(int(d.sigma))))
        if d.misorientation_angle is not None:
            an = Iri(f"{m.iri}/defect/{i}/angle")
            out.append(Triple(dn, HAS_MISORIENTATION_ANGLE, an))
            _emit_quantity_node(out, an, d.misorientation_angle)
        if d.tilt_axis is not None:
            out.append(Triple(dn, HAS_TILT_AXIS, Literal(_json(list(d.tilt_axis)))))
        if d.gb_plane is not None:
            out.append(Triple(dn, HAS_GB_PLANE, Literal(_json(list(d.gb_plane)))))
    if m.provenance_source is not None:
        pv = m.provenance_source
        if pv.doi is not None:
            out.append(Triple(s, HAS_SOURCE_DOI, Literal(pv.doi)))
        if pv.dataset is not None:
            out.append(Triple(s, HAS_SOURCE_DATASET, Literal(pv.dataset)))
        for author in pv.authors:
            out.append(Triple(s, HAS_SOURCE_AUTHOR, Literal(author)))
    for origin in m.derived_from:
        out.append(Triple(s, PROV_WAS_DERIVED_FROM, Iri(origin)))
    if m.record_digest is not None:
        out.append(Triple(s, HAS_RECORD_DIGEST, Literal(m.record_digest)))
    return out


def property_triples(m: CalculatedPropertyModel) -> list[Triple]:
    p = Iri(m.iri)
    out = [
        Triple(p, RDF_TYPE, _p(PROPERTY_CLASSES[m.name])),
        Triple(p, RDFS_LABEL, Literal(m.name)),
        Triple(p, HAS_VALUE, Literal(float(m.value))),
        Triple(p, HAS_UNIT, _unit_iri(m.unit)),
        Triple(p, PROV_WAS_GENERATED_BY, Iri(m.generated_by)),
    ]
    if m.sample_iri is not None:
        out.append(Triple(p, IS_CALCULATED_PROPERTY_OF, Iri(m.sample_iri)))
    return out


def activity_triples(m: SimulationActivity) -> list[Triple]:
    a = Iri(m.iri)
    out = [Triple(a, RDF_TYPE, _p(m.method_curie))]
    for ref in m.inputs:
        out.append(Triple(a, PROV_USED, Iri(ref)))
    for ref in m.outputs:
        out.append(Triple(Iri(ref), PROV_WAS_GENERATED_BY, a))
    if m.ensemble != "none":
        out.append(Triple(a, HAS_STATISTICAL_ENSEMBLE, _p(f"asmo:{m.ensemble}")))
    for name in sorted(m.parameters):
        q = m.parameters[name]
        pn = Iri(f"{m.iri}/parameter/{name}")
        out.append(Triple(a, HAS_SIMULATION_PARAMETER, pn))
        out.append(Triple(pn, RDF_TYPE, _p("asmo:SimulationParameter")))
        out.append(Triple(pn, RDFS_LABEL, Literal(name)))
        out.append(Triple(pn, HAS_VALUE, Literal(float(q.value))))
        out.append(Triple(pn, HAS_UNIT, _unit_iri(q.unit)))
    if m.xc_functional is not None:
        out.append(Triple(a, HAS_XC_FUNCTIONAL, Literal(m.xc_functional)))
    sw = Iri(f"{m.iri}/software")
    out.append(Triple(a, PROV_WAS_ASSOCIATED_WITH, sw))
    out.append(Triple(sw, RDF_TYPE, _p("asmo:Software")))
    out.append(Triple(sw, RDFS_LABEL, Literal(m.software.name)))
    out.append(Triple(sw, HAS_VERSION, Literal(m.software.version)))
    if m.potential is not None:
        pot = Iri(f"{m.iri}/potential")
        out.append(Triple(a, HAS_INTERATOMIC_POTENTIAL, pot))
        out.append(Triple(pot, RDF_TYPE, _p("asmo:InteratomicPotential")))
        out.append(Triple(pot, RDFS_LABEL, Literal(m.potential.label)))
        out.append(Triple(pot, HAS_POTENTIAL_KIND, Literal(m.potential.kind)))
        if m.potential.reference_uri is not None:
            out.append(Triple(pot, HAS_REFERENCE_URL, Literal(m.potential.reference_uri)))
    if m.record_digest is not None:
        out.append(Triple(a, HAS_RECORD_DIGEST, Literal(m.record_digest)))
    for prop in m.properties:
        out.extend(property_triples(prop))
    return out


def operation_triples(m: MathOperationModel) -> list[Triple]:
    o = Iri(m.iri)
    out = [Triple(o, RDF_TYPE, _p(OP_CLASSES[m.op_kind]))]
    slots = (HAS_FIRST_OPERAND, HAS_SECOND_OPERAND)
    value_slots = (HAS_FIRST_OPERAND_VALUE, HAS_SECOND_OPERAND_VALUE)
    for i, ref in enumerate(m.input_refs):
        if ref.iri is not None:
            out.append(Triple(o, slots[i], Iri(ref.iri)))
            out.append(Triple(o, PROV_USED, Iri(ref.iri)))
        else:
            out.append(Triple(o, value_slots[i], Literal(float(ref.value))))
    if m.series:
        payload = []
        for x, ref in m.series:
            if ref.iri is not None:
                payload.append([x, {"ref": ref.iri}])
                out.append(Triple(o, PROV_USED, Iri(ref.iri)))
            else:
                payload.append([x, {"value": ref.value}])
        out.append(Triple(o, HAS_SERIES_DATA, Literal(_json(payload))))
    if m.scalar is not None:
        out.append(Triple(o, HAS_SCALAR_OPERAND, Literal(float(m.scalar))))
    out.extend(property_triples(m.output))
    return out


def to_graph(bundle: ModelBundle, store: TripleStore) -> int:
    """Serialize a bundle into the store; returns the number of new triples."""
    triples: list[Triple] = []
    for s in bundle.samples:
        triples.extend(sample_triples(s))
    for a in bundle.activities:
        triples.extend(activity_triples(a))
    for op in bundle.math_ops:
        triples.extend(operation_triples(op))
    return store.add_triples(triples)


# --- reconstruction ----------------------------------------------------------


def _class_curie(store: TripleStore, iri: Iri) -> str:
    types = store.types_of(iri)
    if not types:
        raise UnknownInstanceError(f"{iri} has no type triple in the store")
    for t in types:
        rec = term_by_iri(str(t))
        if rec is not None and rec.kind == "class":
            return rec.curie
    raise UnknownInstanceError(f"{iri} has no registered class type")


def _require(store: TripleStore, iri: Iri, preds: dict[str, Iri]) -> dict[str, object]:
    """Fetch mandatory predicate values; raise IncompleteInstanceError listing gaps."""
    vals = {}
    missing = []
    for name, pred in preds.items():
        v = store.value(iri, pred)
        if v is None:
            missing.append(str(pred))
        else:
            vals[name] = v
    if missing:
        raise IncompleteInstanceError(str(iri), missing)
    return vals


def _literal(v) -> object:
    if not isinstance(v, Literal):
        raise IncompleteInstanceError("<object>", ["expected literal"])
    return v.value


def _unit_symbol(store: TripleStore, iri: Iri) -> str:
    v = store.value(iri, HAS_UNIT)
    if not isinstance(v, Iri):
        raise IncompleteInstanceError(str(iri), [str(HAS_UNIT)])
    rec = unit_by_iri(str(v))
    if rec is None:
        raise IncompleteInstanceError(str(iri), [str(HAS_UNIT)])
    return rec.symbol


def _quantity_from_node(store: TripleStore, node: Iri) -> Quantity:
    vals = _require(store, node, {"value": HAS_VALUE})
    return Quantity(value=float(_literal(vals["value"])), unit=_unit_symbol(store, node))


def _sample_from_graph(store: TripleStore, iri: Iri) -> AtomicScaleSample:
    vals = _require(store, iri, {"label": RDFS_LABEL, "n_atoms": HAS_NUMBER_OF_ATOMS})
    composition = []
    for sp in store.objects(iri, HAS_SPECIES):
        spv = _require(store, sp, {"el": HAS_ELEMENT_SYMBOL, "n": HAS_ATOM_COUNT})
        composition.append((str(_literal(spv["el"])), int(_literal(spv["n"]))))
    composition.sort()
    cell = None
    cell_node = store.value(iri, HAS_SIMULATION_CELL)
    if isinstance(cell_node, Iri):
        cv = _require(store, cell_node, {"volume": HAS_VOLUME, "vectors": HAS_CELL_VECTORS, "pbc": HAS_PBC})
        cell = CellModel(
            vectors=json.loads(str(_literal(cv["vectors"]))),
            pbc=json.loads(str(_literal(cv["pbc"]))),
            volume=float(_literal(cv["volume"])),
        )
    positions = None
    pos_lit = store.value(iri, HAS_ATOMIC_POSITIONS)
    if pos_lit is not None:
        positions = [(el, (x, y, z)) for el, x, y, z in json.loads(str(_literal(pos_lit)))]
    crystal = None
    cr = store.value(iri, HAS_CRYSTAL_STRUCTURE)
    if isinstance(cr, Iri):
        crv = _require(store, cr, {"name": RDFS_LABEL, "sg": HAS_SPACE_GROUP, "lp": HAS_LATTICE_PARAMETER})
        crystal = CrystalModel(
            name=str(_literal(crv["name"])),
            space_group=int(_literal(crv["sg"])),
            lattice_parameter=_quantity_from_node(store, crv["lp"]),
        )
    defects = []
    defect_nodes = sorted(
        (n for n in store.objects(iri, HAS_DEFECT) if isinstance(n, Iri)),
        key=lambda n: int(str(n).rsplit("/", 1)[1]),
    )
    for dn in defect_nodes:
        kind = DEFECT_KINDS_BY_CLASS[_class_curie(store, dn)]
        angle_node = store.value(dn, HAS_MISORIENTATION_ANGLE)
        site = store.value(dn, HAS_SITE_SPECIES)
        guest = store.value(dn, HAS_GUEST_SPECIES)
        sigma = store.value(dn, HAS_SIGMA)
        tilt = store.value(dn, HAS_TILT_AXIS)
        plane = store.value(dn, HAS_GB_PLANE)
        defects.append(
            DefectModel(
                kind=kind,
                site_species=str(_literal(site)) if site is not None else None,
                guest_species=str(_literal(guest)) if guest is not None else None,
                sigma=int(_literal(sigma)) if sigma is not None else None,
                misorientation_angle=_quantity_from_node(store, angle_node) if isinstance(angle_node, Iri) else None,
                tilt_axis=tuple(json.loads(str(_literal(tilt)))) if tilt is not None else None,
                gb_plane=tuple(json.loads(str(_literal(plane)))) if plane is not None else None,
            )
        )
    doi = store.value(iri, HAS_SOURCE_DOI)
    dataset = store.value(iri, HAS_SOURCE_DATASET)
    authors = sorted(str(_literal(a)) for a in store.objects(iri, HAS_SOURCE_AUTHOR))
    provenance = None
    if doi is not None or dataset is not None or authors:
        provenance = ProvenanceInfo(
            doi=str(_literal(doi)) if doi is not None else None,
            dataset=str(_literal(dataset)) if dataset is not None else None,
            authors=authors,
        )
    digest = store.value(iri, HAS_RECORD_DIGEST)
    return AtomicScaleSample(
        iri=str(iri),
        label=str(_literal(vals["label"])),
        composition=composition,
        n_atoms=int(_literal(vals["n_atoms"])),
        cell=cell,
        positions=positions,
        crystal=crystal,
        defects=defects,
        provenance_source=provenance,
        derived_from=sorted(str(o) for o in store.objects(iri, PROV_WAS_DERIVED_FROM) if isinstance(o, Iri)),
        record_digest=str(_literal(digest)) if digest is not None else None,
    )


def _property_from_graph(store: TripleStore, iri: Iri) -> CalculatedPropertyModel:
    vals = _require(store, iri, {"name": RDFS_LABEL, "value": HAS_VALUE, "generated_by": PROV_WAS_GENERATED_BY})
    sample = store.value(iri, IS_CALCULATED_PROPERTY_OF)
    return CalculatedPropertyModel(
        iri=str(iri),
        name=str(_literal(vals["name"])),
        value=float(_literal(vals["value"])),
        unit=_unit_symbol(store, iri),
        sample_iri=str(sample) if isinstance(sample, Iri) else None,
        generated_by=str(vals["generated_by"]),
    )


def _generated_nodes(store: TripleStore, by: Iri) -> list[Iri]:
    return store.subjects_with(PROV_WAS_GENERATED_BY, by)


def _activity_from_graph(store: TripleStore, iri: Iri) -> SimulationActivity:
    method = _class_curie(store, iri)
    sw_node = store.value(iri, PROV_WAS_ASSOCIATED_WITH)
    if not isinstance(sw_node, Iri):
        raise IncompleteInstanceError(str(iri), [str(PROV_WAS_ASSOCIATED_WITH)])
    sw_vals = _require(store, sw_node, {"name": RDFS_LABEL, "version": HAS_VERSION})
    software = SoftwareSpec(name=str(_literal(sw_vals["name"])), version=str(_literal(sw_vals["version"])))
    ensemble = "none"
    ens = store.value(iri, HAS_STATISTICAL_ENSEMBLE)
    if isinstance(ens, Iri):
        rec = term_by_iri(str(ens))
        if rec is not None:
            ensemble = rec.curie.split(":", 1)[1]
    parameters = {}
    for pn in store.objects(iri, HAS_SIMULATION_PARAMETER):
        pv = _require(store, pn, {"name": RDFS_LABEL, "value": HAS_VALUE})
        parameters[str(_literal(pv["name"]))] = Quantity(
            value=float(_literal(pv["value"])), unit=_unit_symbol(store, pn)
        )
    xc = store.value(iri, HAS_XC_FUNCTIONAL)
    potential = None
    pot_node = store.value(iri, HAS_INTERATOMIC_POTENTIAL)
    if isinstance(pot_node, Iri):
        pvals = _require(store, pot_node, {"label": RDFS_LABEL, "kind": HAS_POTENTIAL_KIND})
        ref = store.value(pot_node, HAS_REFERENCE_URL)
        potential = PotentialModel(
            label=str(_literal(pvals["label"])),
            kind=str(_literal(pvals["kind"])),
            reference_uri=str(_literal(ref)) if ref is not None else None,
        )
    outputs = []
    properties = []
    for node in _generated_nodes(store, iri):
        curie = _class_curie(store, node)
        chain = superclass_chain(curie)
        if "cmso:ComputationalSample" in chain:
            outputs.append(str(node))
        elif "asmo:CalculatedProperty" in chain:
            properties.append(_property_from_graph(store, node))
    digest = store.value(iri, HAS_RECORD_DIGEST)
    return SimulationActivity(
        iri=str(iri),
        method_curie=method,
        ensemble=ensemble,
        parameters=parameters,
        xc_functional=str(_literal(xc)) if xc is not None else None,
        software=software,
        potential=potential,
        inputs=sorted(str(o) for o in store.objects(iri, PROV_USED) if isinstance(o, Iri)),
        outputs=sorted(outputs),
        properties=sorted(properties, key=lambda m: m.iri),
        record_digest=str(_literal(digest)) if digest is not None else None,
    )


def _operand_value(store: TripleStore, iri: str) -> float:
    v = store.value(Iri(iri), HAS_VALUE)
    if not isinstance(v, Literal) or not v.is_numeric:
        raise IncompleteInstanceError(iri, [str(HAS_VALUE)])
    return float(v.value)


def _operation_from_graph(store: TripleStore, iri: Iri) -> MathOperationModel:
    op_kind = OP_KINDS_BY_CLASS[_class_curie(store, iri)]
    input_refs: list[OperandRef] = []
    for slot, value_slot in (
        (HAS_FIRST_OPERAND, HAS_FIRST_OPERAND_VALUE),
        (HAS_SECOND_OPERAND, HAS_SECOND_OPERAND_VALUE),
    ):
        link = store.value(iri, slot)
        lit = store.value(iri, value_slot)
        if isinstance(link, Iri):
            input_refs.append(OperandRef(iri=str(link), value=_operand_value(store, str(link))))
        elif lit is not None:
            input_refs.append(OperandRef(value=float(_literal(lit))))
    series: list[tuple[float, OperandRef]] = []
    series_lit = store.value(iri, HAS_SERIES_DATA)
    if series_lit is not None:
        for x, entry in json.loads(str(_literal(series_lit))):
            if "ref" in entry:
                series.append((float(x), OperandRef(iri=entry["ref"], value=_operand_value(store, entry["ref"]))))
            else:
                series.append((float(x), OperandRef(value=float(entry["value"]))))
    scalar = store.value(iri, HAS_SCALAR_OPERAND)
    outputs = _generated_nodes(store, iri)
    if not outputs:
        raise IncompleteInstanceError(str(iri), [str(PROV_WAS_GENERATED_BY) + " (inverse)"])
    output = _property_from_graph(store, outputs[0])
    return MathOperationModel(
        iri=str(iri),
        op_kind=op_kind,
        input_refs=input_refs,
        series=series,
        scalar=float(_literal(scalar)) if scalar is not None else None,
        output=output,
    )


def from_graph(store: TripleStore, iri: str):
    """Reconstruct the model object stored at an IRI.

    Dispatches on the instance's class: samples, activities, calculated
    properties, and math operations are modeled; anything else raises
    UnknownInstanceError.
    """
    node = Iri(iri)
    curie = _class_curie(store, node)
    chain = superclass_chain(curie)
    if "cmso:ComputationalSample" in chain:
        return _sample_from_graph(store, node)
    if "asmo:Simulation" in chain:
        return _activity_from_graph(store, node)
    if "asmo:CalculatedProperty" in chain:
        return _property_from_graph(store, node)
    if "asmo:MathematicalOperation" in chain:
        return _operation_from_graph(store, node)
    raise UnknownInstanceError(f"{iri} has class {curie}, which is not a modeled instance class")
