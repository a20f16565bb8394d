"""Conceptual-dictionary templates: parsing, validation, serialization.

A template document is the system's ingestion boundary. It has three
sections mirroring the core abstractions of a simulation record:
``computational_sample``, ``workflow``, and ``math_operations``. Documents
are written in a YAML subset (maps, sequences, scalars; no anchors or
aliases) or JSON.

Parsing is strict by default: unknown keys raise SchemaError naming the
offending path. With ``lenient=True`` unknown keys are collected into the
document's warning list instead. Validation never raises for content
problems; it returns a deterministic report of coded issues:

    E_ELEMENT  element symbols, composition/position agreement
    E_UNIT     unit symbols, fixed parameter units, controlled property names
    E_METHOD   method vocabulary and parameter requirements (e.g. NPT needs T)
    E_REF      dangling ids, duplicate ids, math-operation arity
    E_DEFECT   defect conditional requirements (e.g. grain boundary needs sigma)
    E_CELL     cell singularity, crystal geometry
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import yaml

from .errors import SchemaError, TemplateSyntaxError
from .registry import PREFIXES, unit_lookup
from .errors import UnknownUnitError

PERIODIC_TABLE = frozenset(
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La "
    "Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po "
    "At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg "
    "Cn Nh Fl Mc Lv Ts Og".split()
)

METHODS = ("density_functional_theory", "molecular_dynamics", "molecular_statics")
METHOD_CURIES = {
    "density_functional_theory": "asmo:DensityFunctionalTheory",
    "molecular_dynamics": "asmo:MolecularDynamics",
    "molecular_statics": "asmo:MolecularStatics",
}
ENSEMBLES = ("NPT", "NVT", "NVE", "none")
DEFECT_KINDS = ("vacancy", "substitutional", "interstitial", "grain_boundary")
POTENTIAL_KINDS = ("classical", "machine_learning", "dft_na")
OP_KINDS = ("difference", "scale", "divide", "linear_fit")

# Property names a workflow may report directly.
WORKFLOW_PROPERTY_NAMES = (
    "total_energy",
    "potential_energy",
    "volume_per_atom",
    "grain_boundary_energy",
    "segregation_energy",
    "work_of_separation",
    "formation_energy",
    "bulk_modulus",
)
# Additional names reserved for math-operation outputs.
DERIVED_PROPERTY_NAMES = (
    "scaled_energy",
    "energy_difference",
    "thermal_expansion_coefficient",
)
PROPERTY_NAMES = WORKFLOW_PROPERTY_NAMES + DERIVED_PROPERTY_NAMES

# Units fixed by the schema for the named workflow parameters.
PARAMETER_UNITS = {
    "temperature": "K",
    "pressure": "GigaPA",
    "energy_cutoff": "EV",
    "convergence_force": "EV-PER-ANGSTROM",
}

_INSTANCE_PREFIXES = ("sample", "activity", "property", "operation")


def is_iri_ref(ref: str) -> bool:
    """True if a reference names a graph IRI rather than a document-local id."""
    if "://" in ref:
        return True
    prefix, sep, local = ref.partition(":")
    return bool(sep) and prefix in _INSTANCE_PREFIXES and bool(local)


def expand_ref(ref: str) -> str:
    """Expand an IRI-shaped reference to its full IRI form."""
    if "://" in ref:
        return ref
    prefix, _, local = ref.partition(":")
    return PREFIXES[prefix] + local


@dataclass
class Quantity:
    value: float
    unit: str


@dataclass
class CrystalSpec:
    name: str
    space_group: int
    lattice_parameter: Quantity


@dataclass
class CellSpec:
    vectors: list[list[float]]
    pbc: list[bool]


@dataclass
class PositionsRef:
    path: str
    format: str


@dataclass
class DefectSpec:
    kind: str
    site_species: str | None = None
    guest_species: str | None = None
    sigma: int | None = None
    misorientation_angle: Quantity | None = None
    tilt_axis: tuple[int, int, int] | None = None
    gb_plane: tuple[int, int, int] | None = None


@dataclass
class ProvenanceInfo:
    doi: str | None = None
    dataset: str | None = None
    authors: list[str] = field(default_factory=list)


@dataclass
class SampleSection:
    label: str
    id: str | None = None
    composition: list[tuple[str, int]] = field(default_factory=list)
    crystal_structure: CrystalSpec | None = None
    cell: CellSpec | None = None
    positions: list[tuple[str, tuple[float, float, float]]] | PositionsRef | None = None
    defects: list[DefectSpec] = field(default_factory=list)
    provenance: ProvenanceInfo | None = None
    derived_from: list[str] = field(default_factory=list)
    record_digest: str | None = None


@dataclass
class WorkflowParameters:
    ensemble: str = "none"
    temperature: Quantity | None = None
    pressure: Quantity | None = None
    xc_functional: str | None = None
    energy_cutoff: Quantity | None = None
    convergence_force: Quantity | None = None
    extra: dict[str, Quantity] = field(default_factory=dict)


@dataclass
class SoftwareSpec:
    name: str
    version: str


@dataclass
class PotentialSpec:
    label: str
    kind: str
    reference_uri: str | None = None


@dataclass
class CalculatedPropertySpec:
    name: str
    value: float
    unit: str
    sample_ref: str
    id: str | None = None


@dataclass
class WorkflowSection:
    method: str
    software: SoftwareSpec
    id: str | None = None
    input_samples: list[str] = field(default_factory=list)
    output_samples: list[str] = field(default_factory=list)
    parameters: WorkflowParameters = field(default_factory=WorkflowParameters)
    potential: PotentialSpec | None = None
    calculated_properties: list[CalculatedPropertySpec] = field(default_factory=list)
    record_digest: str | None = None


@dataclass
class OpInput:
    """One math-operation operand: a reference to a property or a literal value."""
    ref: str | None = None
    value: float | None = None


@dataclass
class SeriesPoint:
    x: float
    y: OpInput


@dataclass
class OutputSpec:
    name: str
    unit: str


@dataclass
class MathOpSection:
    op: str
    output: OutputSpec
    id: str | None = None
    inputs: list[OpInput] = field(default_factory=list)
    series: list[SeriesPoint] = field(default_factory=list)
    scalar: float | None = None


@dataclass
class TemplateDocument:
    samples: list[SampleSection] = field(default_factory=list)
    workflows: list[WorkflowSection] = field(default_factory=list)
    math_operations: list[MathOpSection] = field(default_factory=list)
    source_format: str = field(default="yaml", compare=False)
    warnings: list[str] = field(default_factory=list, compare=False)


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    path: str
    message: str


# --- low-level parsing helpers ----------------------------------------------


class _Walker:
    """Schema walker tracking paths and unknown-key policy."""

    def __init__(self, lenient: bool):
        self.lenient = lenient
        self.warnings: list[str] = []

    def check_keys(self, obj: dict, allowed: tuple[str, ...], path: str) -> None:
        for key in obj:
            if key not in allowed:
                if self.lenient:
                    self.warnings.append(f"{path}.{key}: unknown key ignored")
                else:
                    raise SchemaError(f"{path}.{key}", "unknown key")

    def expect_map(self, obj: Any, path: str) -> dict:
        if not isinstance(obj, dict):
            raise SchemaError(path, f"expected a map, got {type(obj).__name__}")
        return obj

    def expect_list(self, obj: Any, path: str) -> list:
        if not isinstance(obj, list):
            raise SchemaError(path, f"expected a sequence, got {type(obj).__name__}")
        return obj

    def expect_str(self, obj: Any, path: str) -> str:
        if not isinstance(obj, str) or not obj:
            raise SchemaError(path, "expected a non-empty string")
        return obj

    def expect_bool(self, obj: Any, path: str) -> bool:
        if not isinstance(obj, bool):
            raise SchemaError(path, "expected a boolean")
        return obj

    def expect_int(self, obj: Any, path: str) -> int:
        if isinstance(obj, bool) or not isinstance(obj, int):
            raise SchemaError(path, "expected an integer")
        return obj

    def expect_number(self, obj: Any, path: str) -> float:
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            raise SchemaError(path, "expected a number")
        value = float(obj)
        if not math.isfinite(value):
            raise SchemaError(path, "non-finite numbers are not allowed")
        return value

    def get(self, obj: dict, key: str, path: str) -> Any:
        if key not in obj or obj[key] is None:
            raise SchemaError(f"{path}.{key}", "required key is missing")
        return obj[key]


def _load_yaml(text: str) -> Any:
    try:
        for event in yaml.parse(text):
            if isinstance(event, yaml.AliasEvent):
                raise TemplateSyntaxError(
                    "YAML anchors/aliases are not part of the supported subset",
                    event.start_mark.line + 1,
                    event.start_mark.column + 1,
                )
        return yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise TemplateSyntaxError(exc.problem or str(exc), line, col) from exc
    except yaml.YAMLError as exc:
        raise TemplateSyntaxError(str(exc)) from exc


def _load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise TemplateSyntaxError(exc.msg, exc.lineno, exc.colno) from exc


def _parse_quantity(w: _Walker, obj: Any, path: str) -> Quantity:
    m = w.expect_map(obj, path)
    w.check_keys(m, ("value", "unit"), path)
    return Quantity(
        value=w.expect_number(w.get(m, "value", path), f"{path}.value"),
        unit=w.expect_str(w.get(m, "unit", path), f"{path}.unit"),
    )


def _parse_int_triple(w: _Walker, obj: Any, path: str) -> tuple[int, int, int]:
    seq = w.expect_list(obj, path)
    if len(seq) != 3:
        raise SchemaError(path, "expected exactly 3 integers")
    return tuple(w.expect_int(v, f"{path}[{i}]") for i, v in enumerate(seq))  # type: ignore[return-value]


def _parse_composition(w: _Walker, obj: Any, path: str) -> list[tuple[str, int]]:
    seq = w.expect_list(obj, path)
    out = []
    for i, entry in enumerate(seq):
        p = f"{path}[{i}]"
        m = w.expect_map(entry, p)
        w.check_keys(m, ("element", "count"), p)
        out.append(
            (
                w.expect_str(w.get(m, "element", p), f"{p}.element"),
                w.expect_int(w.get(m, "count", p), f"{p}.count"),
            )
        )
    return out


def _parse_cell(w: _Walker, obj: Any, path: str) -> CellSpec:
    m = w.expect_map(obj, path)
    w.check_keys(m, ("vectors", "pbc"), path)
    vec_obj = w.expect_list(w.get(m, "vectors", path), f"{path}.vectors")
    if len(vec_obj) != 3:
        raise SchemaError(f"{path}.vectors", "expected 3 rows")
    vectors = []
    for i, row in enumerate(vec_obj):
        rp = f"{path}.vectors[{i}]"
        rl = w.expect_list(row, rp)
        if len(rl) != 3:
            raise SchemaError(rp, "expected 3 components")
        vectors.append([w.expect_number(v, f"{rp}[{j}]") for j, v in enumerate(rl)])
    pbc_obj = w.expect_list(w.get(m, "pbc", path), f"{path}.pbc")
    if len(pbc_obj) != 3:
        raise SchemaError(f"{path}.pbc", "expected 3 booleans")
    pbc = [w.expect_bool(v, f"{path}.pbc[{i}]") for i, v in enumerate(pbc_obj)]
    return CellSpec(vectors=vectors, pbc=pbc)


def _parse_positions(w: _Walker, obj: Any, path: str):
    if isinstance(obj, dict):
        w.check_keys(obj, ("path", "format"), path)
        return PositionsRef(
            path=w.expect_str(w.get(obj, "path", path), f"{path}.path"),
            format=w.expect_str(w.get(obj, "format", path), f"{path}.format"),
        )
    seq = w.expect_list(obj, path)
    out = []
    for i, entry in enumerate(seq):
        p = f"{path}[{i}]"
        el = w.expect_list(entry, p)
        if len(el) != 4:
            raise SchemaError(p, "expected [element, x, y, z]")
        out.append(
            (
                w.expect_str(el[0], f"{p}[0]"),
                tuple(w.expect_number(el[k], f"{p}[{k}]") for k in (1, 2, 3)),
            )
        )
    return out


def _parse_defect(w: _Walker, obj: Any, path: str) -> DefectSpec:
    m = w.expect_map(obj, path)
    allowed = ("kind", "site_species", "guest_species", "sigma", "misorientation_angle", "tilt_axis", "gb_plane")
    w.check_keys(m, allowed, path)
    kind = w.expect_str(w.get(m, "kind", path), f"{path}.kind")
    if kind not in DEFECT_KINDS:
        raise SchemaError(f"{path}.kind", f"must be one of {', '.join(DEFECT_KINDS)}")
    return DefectSpec(
        kind=kind,
        site_species=w.expect_str(m["site_species"], f"{path}.site_species") if m.get("site_species") is not None else None,
        guest_species=w.expect_str(m["guest_species"], f"{path}.guest_species") if m.get("guest_species") is not None else None,
        sigma=w.expect_int(m["sigma"], f"{path}.sigma") if m.get("sigma") is not None else None,
        misorientation_angle=_parse_quantity(w, m["misorientation_angle"], f"{path}.misorientation_angle")
        if m.get("misorientation_angle") is not None
        else None,
        tilt_axis=_parse_int_triple(w, m["tilt_axis"], f"{path}.tilt_axis") if m.get("tilt_axis") is not None else None,
        gb_plane=_parse_int_triple(w, m["gb_plane"], f"{path}.gb_plane") if m.get("gb_plane") is not None else None,
    )


def _parse_sample(w: _Walker, obj: Any, path: str) -> SampleSection:
    m = w.expect_map(obj, path)
    allowed = (
        "id", "label", "composition", "crystal_structure", "cell",
        "positions", "defects", "provenance", "derived_from", "record_digest",
    )
    w.check_keys(m, allowed, path)
    crystal = None
    if m.get("crystal_structure") is not None:
        cp = f"{path}.crystal_structure"
        cm = w.expect_map(m["crystal_structure"], cp)
        w.check_keys(cm, ("name", "space_group", "lattice_parameter"), cp)
        crystal = CrystalSpec(
            name=w.expect_str(w.get(cm, "name", cp), f"{cp}.name"),
            space_group=w.expect_int(w.get(cm, "space_group", cp), f"{cp}.space_group"),
            lattice_parameter=_parse_quantity(w, w.get(cm, "lattice_parameter", cp), f"{cp}.lattice_parameter"),
        )
    provenance = None
    if m.get("provenance") is not None:
        pp = f"{path}.provenance"
        pm = w.expect_map(m["provenance"], pp)
        w.check_keys(pm, ("doi", "dataset", "authors"), pp)
        authors = []
        if pm.get("authors") is not None:
            authors = [
                w.expect_str(a, f"{pp}.authors[{i}]")
                for i, a in enumerate(w.expect_list(pm["authors"], f"{pp}.authors"))
            ]
        provenance = ProvenanceInfo(
            doi=w.expect_str(pm["doi"], f"{pp}.doi") if pm.get("doi") is not None else None,
            dataset=w.expect_str(pm["dataset"], f"{pp}.dataset") if pm.get("dataset") is not None else None,
            authors=authors,
        )
    return SampleSection(
        id=w.expect_str(m["id"], f"{path}.id") if m.get("id") is not None else None,
        label=w.expect_str(w.get(m, "label", path), f"{path}.label"),
        composition=_parse_composition(w, w.get(m, "composition", path), f"{path}.composition"),
        crystal_structure=crystal,
        cell=_parse_cell(w, m["cell"], f"{path}.cell") if m.get("cell") is not None else None,
        positions=_parse_positions(w, m["positions"], f"{path}.positions") if m.get("positions") is not None else None,
        defects=[
            _parse_defect(w, d, f"{path}.defects[{i}]")
            for i, d in enumerate(w.expect_list(m["defects"], f"{path}.defects"))
        ]
        if m.get("defects") is not None
        else [],
        provenance=provenance,
        derived_from=[
            w.expect_str(r, f"{path}.derived_from[{i}]")
            for i, r in enumerate(w.expect_list(m["derived_from"], f"{path}.derived_from"))
        ]
        if m.get("derived_from") is not None
        else [],
        record_digest=w.expect_str(m["record_digest"], f"{path}.record_digest") if m.get("record_digest") is not None else None,
    )


def _parse_workflow(w: _Walker, obj: Any, path: str) -> WorkflowSection:
    m = w.expect_map(obj, path)
    allowed = (
        "id", "method", "input_samples", "output_samples", "parameters",
        "software", "potential", "calculated_properties", "record_digest",
    )
    w.check_keys(m, allowed, path)
    method = w.expect_str(w.get(m, "method", path), f"{path}.method")

    params = WorkflowParameters()
    if m.get("parameters") is not None:
        pp = f"{path}.parameters"
        pm = w.expect_map(m["parameters"], pp)
        w.check_keys(pm, ("ensemble", "temperature", "pressure", "xc_functional", "energy_cutoff", "convergence_force", "extra"), pp)
        extra: dict[str, Quantity] = {}
        if pm.get("extra") is not None:
            em = w.expect_map(pm["extra"], f"{pp}.extra")
            for name, qobj in em.items():
                extra[w.expect_str(name, f"{pp}.extra")] = _parse_quantity(w, qobj, f"{pp}.extra.{name}")
        params = WorkflowParameters(
            ensemble=w.expect_str(pm["ensemble"], f"{pp}.ensemble") if pm.get("ensemble") is not None else "none",
            temperature=_parse_quantity(w, pm["temperature"], f"{pp}.temperature") if pm.get("temperature") is not None else None,
            pressure=_parse_quantity(w, pm["pressure"], f"{pp}.pressure") if pm.get("pressure") is not None else None,
            xc_functional=w.expect_str(pm["xc_functional"], f"{pp}.xc_functional") if pm.get("xc_functional") is not None else None,
            energy_cutoff=_parse_quantity(w, pm["energy_cutoff"], f"{pp}.energy_cutoff") if pm.get("energy_cutoff") is not None else None,
            convergence_force=_parse_quantity(w, pm["convergence_force"], f"{pp}.convergence_force")
            if pm.get("convergence_force") is not None
            else None,
            extra=extra,
        )

    sp = f"{path}.software"
    sm = w.expect_map(w.get(m, "software", path), sp)
    w.check_keys(sm, ("name", "version"), sp)
    software = SoftwareSpec(
        name=w.expect_str(w.get(sm, "name", sp), f"{sp}.name"),
        version=w.expect_str(w.get(sm, "version", sp), f"{sp}.version"),
    )

    potential = None
    if m.get("potential") is not None:
        tp = f"{path}.potential"
        tm = w.expect_map(m["potential"], tp)
        w.check_keys(tm, ("label", "kind", "reference_uri"), tp)
        kind = w.expect_str(w.get(tm, "kind", tp), f"{tp}.kind")
        if kind not in POTENTIAL_KINDS:
            raise SchemaError(f"{tp}.kind", f"must be one of {', '.join(POTENTIAL_KINDS)}")
        potential = PotentialSpec(
            label=w.expect_str(w.get(tm, "label", tp), f"{tp}.label"),
            kind=kind,
            reference_uri=w.expect_str(tm["reference_uri"], f"{tp}.reference_uri") if tm.get("reference_uri") is not None else None,
        )

    props = []
    if m.get("calculated_properties") is not None:
        for i, pobj in enumerate(w.expect_list(m["calculated_properties"], f"{path}.calculated_properties")):
            p = f"{path}.calculated_properties[{i}]"
            pm2 = w.expect_map(pobj, p)
            w.check_keys(pm2, ("id", "name", "value", "unit", "sample_ref"), p)
            props.append(
                CalculatedPropertySpec(
                    id=w.expect_str(pm2["id"], f"{p}.id") if pm2.get("id") is not None else None,
                    name=w.expect_str(w.get(pm2, "name", p), f"{p}.name"),
                    value=w.expect_number(w.get(pm2, "value", p), f"{p}.value"),
                    unit=w.expect_str(w.get(pm2, "unit", p), f"{p}.unit"),
                    sample_ref=w.expect_str(w.get(pm2, "sample_ref", p), f"{p}.sample_ref"),
                )
            )

    def _str_list(key: str) -> list[str]:
        if m.get(key) is None:
            return []
        return [
            w.expect_str(v, f"{path}.{key}[{i}]")
            for i, v in enumerate(w.expect_list(m[key], f"{path}.{key}"))
        ]

    return WorkflowSection(
        id=w.expect_str(m["id"], f"{path}.id") if m.get("id") is not None else None,
        method=method,
        input_samples=_str_list("input_samples"),
        output_samples=_str_list("output_samples"),
        parameters=params,
        software=software,
        potential=potential,
        calculated_properties=props,
        record_digest=w.expect_str(m["record_digest"], f"{path}.record_digest") if m.get("record_digest") is not None else None,
    )


def _parse_op_input(w: _Walker, obj: Any, path: str) -> OpInput:
    if isinstance(obj, str):
        return OpInput(ref=obj)
    if isinstance(obj, dict):
        w.check_keys(obj, ("value",), path)
        return OpInput(value=w.expect_number(w.get(obj, "value", path), f"{path}.value"))
    raise SchemaError(path, "expected a reference string or {value: number}")


def _parse_mathop(w: _Walker, obj: Any, path: str) -> MathOpSection:
    m = w.expect_map(obj, path)
    w.check_keys(m, ("id", "op", "inputs", "scalar", "output"), path)
    op = w.expect_str(w.get(m, "op", path), f"{path}.op")
    if op not in OP_KINDS:
        raise SchemaError(f"{path}.op", f"must be one of {', '.join(OP_KINDS)}")
    op_path = f"{path}.output"
    om = w.expect_map(w.get(m, "output", path), op_path)
    w.check_keys(om, ("name", "unit"), op_path)
    output = OutputSpec(
        name=w.expect_str(w.get(om, "name", op_path), f"{op_path}.name"),
        unit=w.expect_str(w.get(om, "unit", op_path), f"{op_path}.unit"),
    )
    inputs: list[OpInput] = []
    series: list[SeriesPoint] = []
    raw_inputs = w.expect_list(w.get(m, "inputs", path), f"{path}.inputs")
    if op == "linear_fit":
        for i, pair in enumerate(raw_inputs):
            p = f"{path}.inputs[{i}]"
            pl = w.expect_list(pair, p)
            if len(pl) != 2:
                raise SchemaError(p, "expected [x, y-ref] pair")
            series.append(SeriesPoint(x=w.expect_number(pl[0], f"{p}[0]"), y=_parse_op_input(w, pl[1], f"{p}[1]")))
    else:
        inputs = [_parse_op_input(w, v, f"{path}.inputs[{i}]") for i, v in enumerate(raw_inputs)]
    return MathOpSection(
        id=w.expect_str(m["id"], f"{path}.id") if m.get("id") is not None else None,
        op=op,
        inputs=inputs,
        series=series,
        scalar=w.expect_number(m["scalar"], f"{path}.scalar") if m.get("scalar") is not None else None,
        output=output,
    )


def parse_template(text: str, format: str = "yaml", lenient: bool = False) -> TemplateDocument:
    """Parse template text into a TemplateDocument.

    Raises TemplateSyntaxError for malformed text and SchemaError for
    structural violations (missing required keys, wrong types, unknown keys
    in strict mode).
    """
    if not text.strip():
        raise TemplateSyntaxError("empty template text")
    if format == "yaml":
        data = _load_yaml(text)
    elif format == "json":
        data = _load_json(text)
    else:
        raise ValueError(f"unknown template format: {format!r}")

    w = _Walker(lenient=lenient)
    root = w.expect_map(data, "$")
    w.check_keys(root, ("computational_sample", "workflow", "math_operations"), "$")

    samples = [
        _parse_sample(w, s, f"$.computational_sample[{i}]")
        for i, s in enumerate(w.expect_list(root["computational_sample"], "$.computational_sample"))
    ] if root.get("computational_sample") is not None else []
    workflows = [
        _parse_workflow(w, s, f"$.workflow[{i}]")
        for i, s in enumerate(w.expect_list(root["workflow"], "$.workflow"))
    ] if root.get("workflow") is not None else []
    ops = [
        _parse_mathop(w, s, f"$.math_operations[{i}]")
        for i, s in enumerate(w.expect_list(root["math_operations"], "$.math_operations"))
    ] if root.get("math_operations") is not None else []

    if not samples and not workflows and not ops:
        raise SchemaError("$", "document has no non-empty section")

    return TemplateDocument(
        samples=samples,
        workflows=workflows,
        math_operations=ops,
        source_format=format,
        warnings=w.warnings,
    )


# --- serialization -----------------------------------------------------------


def _quantity_dict(q: Quantity) -> dict:
    return {"value": q.value, "unit": q.unit}


def _sample_dict(s: SampleSection) -> dict:
    out: dict[str, Any] = {}
    if s.id is not None:
        out["id"] = s.id
    out["label"] = s.label
    out["composition"] = [{"element": el, "count": n} for el, n in s.composition]
    if s.crystal_structure is not None:
        out["crystal_structure"] = {
            "name": s.crystal_structure.name,
            "space_group": s.crystal_structure.space_group,
            "lattice_parameter": _quantity_dict(s.crystal_structure.lattice_parameter),
        }
    if s.cell is not None:
        out["cell"] = {"vectors": s.cell.vectors, "pbc": s.cell.pbc}
    if isinstance(s.positions, PositionsRef):
        out["positions"] = {"path": s.positions.path, "format": s.positions.format}
    elif s.positions is not None:
        out["positions"] = [[el, x, y, z] for el, (x, y, z) in s.positions]
    if s.defects:
        dlist = []
        for d in s.defects:
            dd: dict[str, Any] = {"kind": d.kind}
            if d.site_species is not None:
                dd["site_species"] = d.site_species
            if d.guest_species is not None:
                dd["guest_species"] = d.guest_species
            if d.sigma is not None:
                dd["sigma"] = d.sigma
            if d.misorientation_angle is not None:
                dd["misorientation_angle"] = _quantity_dict(d.misorientation_angle)
            if d.tilt_axis is not None:
                dd["tilt_axis"] = list(d.tilt_axis)
            if d.gb_plane is not None:
                dd["gb_plane"] = list(d.gb_plane)
            dlist.append(dd)
        out["defects"] = dlist
    if s.provenance is not None:
        pd: dict[str, Any] = {}
        if s.provenance.doi is not None:
            pd["doi"] = s.provenance.doi
        if s.provenance.dataset is not None:
            pd["dataset"] = s.provenance.dataset
        if s.provenance.authors:
            pd["authors"] = s.provenance.authors
        out["provenance"] = pd
    if s.derived_from:
        out["derived_from"] = s.derived_from
    if s.record_digest is not None:
        out["record_digest"] = s.record_digest
    return out


def _workflow_dict(wf: WorkflowSection) -> dict:
    out: dict[str, Any] = {}
    if wf.id is not None:
        out["id"] = wf.id
    out["method"] = wf.method
    if wf.input_samples:
        out["input_samples"] = wf.input_samples
    if wf.output_samples:
        out["output_samples"] = wf.output_samples
    p = wf.parameters
    pd: dict[str, Any] = {}
    if p.ensemble != "none":
        pd["ensemble"] = p.ensemble
    for key in ("temperature", "pressure", "energy_cutoff", "convergence_force"):
        q = getattr(p, key)
        if q is not None:
            pd[key] = _quantity_dict(q)
    if p.xc_functional is not None:
        pd["xc_functional"] = p.xc_functional
    if p.extra:
        pd["extra"] = {name: _quantity_dict(q) for name, q in p.extra.items()}
    if pd:
        out["parameters"] = pd
    out["software"] = {"name": wf.software.name, "version": wf.software.version}
    if wf.potential is not None:
        td: dict[str, Any] = {"label": wf.potential.label, "kind": wf.potential.kind}
        if wf.potential.reference_uri is not None:
            td["reference_uri"] = wf.potential.reference_uri
        out["potential"] = td
    if wf.calculated_properties:
        plist = []
        for cp in wf.calculated_properties:
            cd: dict[str, Any] = {}
            if cp.id is not None:
                cd["id"] = cp.id
            cd.update({"name": cp.name, "value": cp.value, "unit": cp.unit, "sample_ref": cp.sample_ref})
            plist.append(cd)
        out["calculated_properties"] = plist
    if wf.record_digest is not None:
        out["record_digest"] = wf.record_digest
    return out


def _op_input_obj(v: OpInput):
    return v.ref if v.ref is not None else {"value": v.value}


def _mathop_dict(op: MathOpSection) -> dict:
    out: dict[str, Any] = {}
    if op.id is not None:
        out["id"] = op.id
    out["op"] = op.op
    if op.op == "linear_fit":
        out["inputs"] = [[pt.x, _op_input_obj(pt.y)] for pt in op.series]
    else:
        out["inputs"] = [_op_input_obj(v) for v in op.inputs]
    if op.scalar is not None:
        out["scalar"] = op.scalar
    out["output"] = {"name": op.output.name, "unit": op.output.unit}
    return out


def template_to_dict(doc: TemplateDocument) -> dict:
    out: dict[str, Any] = {}
    if doc.samples:
        out["computational_sample"] = [_sample_dict(s) for s in doc.samples]
    if doc.workflows:
        out["workflow"] = [_workflow_dict(wf) for wf in doc.workflows]
    if doc.math_operations:
        out["math_operations"] = [_mathop_dict(op) for op in doc.math_operations]
    return out


def serialize_template(doc: TemplateDocument, format: str | None = None) -> str:
    """Serialize a document; parse_template of the result is field-identical."""
    fmt = format or doc.source_format
    data = template_to_dict(doc)
    if fmt == "yaml":
        return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, allow_unicode=True)
    if fmt == "json":
        return json.dumps(data, indent=2, ensure_ascii=False) + "\n"
    raise ValueError(f"unknown template format: {fmt!r}")


# --- validation ---------------------------------------------------------------


def _check_quantity_unit(issues, q: Quantity, expected: str | None, path: str) -> None:
    try:
        unit_lookup(q.unit)
    except UnknownUnitError:
        issues.append(ValidationIssue("E_UNIT", path, f"unknown unit {q.unit!r}"))
        return
    if expected is not None and q.unit != expected:
        issues.append(ValidationIssue("E_UNIT", path, f"expected unit {expected}, got {q.unit}"))


def _det3(v: list[list[float]]) -> float:
    return (
        v[0][0] * (v[1][1] * v[2][2] - v[1][2] * v[2][1])
        - v[0][1] * (v[1][0] * v[2][2] - v[1][2] * v[2][0])
        + v[0][2] * (v[1][0] * v[2][1] - v[1][1] * v[2][0])
    )


def validate_template(doc: TemplateDocument) -> list[ValidationIssue]:
    """Check all content invariants; an empty report means the document is valid.

    Pure function: the same document always yields the identical report.
    """
    issues: list[ValidationIssue] = []
    ids: dict[str, str] = {}

    def claim_id(section_id: str | None, path: str) -> None:
        if section_id is None:
            return
        if section_id in ids:
            issues.append(ValidationIssue("E_REF", path, f"duplicate id {section_id!r} (also at {ids[section_id]})"))
        else:
            ids[section_id] = path

    sample_ids = {s.id for s in doc.samples if s.id is not None}
    property_ids = {
        cp.id for wf in doc.workflows for cp in wf.calculated_properties if cp.id is not None
    }
    op_ids = {op.id for op in doc.math_operations if op.id is not None}

    for i, s in enumerate(doc.samples):
        path = f"$.computational_sample[{i}]"
        claim_id(s.id, path)
        if not s.composition:
            issues.append(ValidationIssue("E_ELEMENT", f"{path}.composition", "composition must not be empty"))
        counts: dict[str, int] = {}
        for j, (el, n) in enumerate(s.composition):
            if el not in PERIODIC_TABLE:
                issues.append(ValidationIssue("E_ELEMENT", f"{path}.composition[{j}].element", f"unknown element symbol {el!r}"))
            if n <= 0:
                issues.append(ValidationIssue("E_ELEMENT", f"{path}.composition[{j}].count", "count must be positive"))
            counts[el] = counts.get(el, 0) + n
        if isinstance(s.positions, list):
            if sum(counts.values()) != len(s.positions):
                issues.append(
                    ValidationIssue(
                        "E_ELEMENT",
                        f"{path}.positions",
                        f"composition counts sum to {sum(counts.values())} but {len(s.positions)} positions given",
                    )
                )
            pos_counts: dict[str, int] = {}
            for el, _xyz in s.positions:
                pos_counts[el] = pos_counts.get(el, 0) + 1
            if pos_counts != counts and sum(counts.values()) == len(s.positions):
                issues.append(
                    ValidationIssue("E_ELEMENT", f"{path}.positions", "per-species position counts disagree with composition")
                )
        if s.cell is not None:
            det = _det3(s.cell.vectors)
            scale = max(abs(x) for row in s.cell.vectors for x in row) or 1.0
            if abs(det) < 1e-10 * scale**3:
                issues.append(ValidationIssue("E_CELL", f"{path}.cell.vectors", "cell determinant is zero"))
        if s.crystal_structure is not None:
            cs = s.crystal_structure
            if not 1 <= cs.space_group <= 230:
                issues.append(ValidationIssue("E_CELL", f"{path}.crystal_structure.space_group", "space group must be in 1..230"))
            _check_quantity_unit(issues, cs.lattice_parameter, "ANGSTROM", f"{path}.crystal_structure.lattice_parameter")
            if cs.lattice_parameter.value <= 0:
                issues.append(ValidationIssue("E_CELL", f"{path}.crystal_structure.lattice_parameter", "lattice parameter must be positive"))
        for j, d in enumerate(s.defects):
            dp = f"{path}.defects[{j}]"
            for attr in ("site_species", "guest_species"):
                val = getattr(d, attr)
                if val is not None and val not in PERIODIC_TABLE:
                    issues.append(ValidationIssue("E_ELEMENT", f"{dp}.{attr}", f"unknown element symbol {val!r}"))
            if d.kind == "grain_boundary":
                if d.sigma is None:
                    issues.append(ValidationIssue("E_DEFECT", dp, "grain_boundary requires sigma"))
                elif d.sigma <= 0:
                    issues.append(ValidationIssue("E_DEFECT", f"{dp}.sigma", "sigma must be a positive integer"))
            if d.kind == "vacancy" and d.guest_species is not None:
                issues.append(ValidationIssue("E_DEFECT", dp, "vacancy forbids guest_species"))
            if d.kind in ("substitutional", "interstitial") and d.guest_species is None:
                issues.append(ValidationIssue("E_DEFECT", dp, f"{d.kind} requires guest_species"))
            if d.misorientation_angle is not None:
                _check_quantity_unit(issues, d.misorientation_angle, "DEG", f"{dp}.misorientation_angle")
        for j, ref in enumerate(s.derived_from):
            if not is_iri_ref(ref) and ref not in sample_ids:
                issues.append(ValidationIssue("E_REF", f"{path}.derived_from[{j}]", f"unresolved sample reference {ref!r}"))

    for i, wf in enumerate(doc.workflows):
        path = f"$.workflow[{i}]"
        claim_id(wf.id, path)
        if wf.method not in METHODS:
            issues.append(ValidationIssue("E_METHOD", f"{path}.method", f"unknown method {wf.method!r}"))
        p = wf.parameters
        if p.ensemble not in ENSEMBLES:
            issues.append(ValidationIssue("E_METHOD", f"{path}.parameters.ensemble", f"unknown ensemble {p.ensemble!r}"))
        if p.ensemble in ("NPT", "NVT") and p.temperature is None:
            issues.append(ValidationIssue("E_METHOD", f"{path}.parameters", f"{p.ensemble} requires a temperature"))
        for key, expected in PARAMETER_UNITS.items():
            q = getattr(p, key)
            if q is not None:
                _check_quantity_unit(issues, q, expected, f"{path}.parameters.{key}")
        for name, q in p.extra.items():
            _check_quantity_unit(issues, q, None, f"{path}.parameters.extra.{name}")
        for ref_list, key in ((wf.input_samples, "input_samples"), (wf.output_samples, "output_samples")):
            for j, ref in enumerate(ref_list):
                if not is_iri_ref(ref) and ref not in sample_ids:
                    issues.append(ValidationIssue("E_REF", f"{path}.{key}[{j}]", f"unresolved sample reference {ref!r}"))
        for j, cp in enumerate(wf.calculated_properties):
            cpp = f"{path}.calculated_properties[{j}]"
            claim_id(cp.id, cpp)
            if cp.name not in WORKFLOW_PROPERTY_NAMES:
                issues.append(ValidationIssue("E_UNIT", f"{cpp}.name", f"property name {cp.name!r} is not in the controlled list"))
            _check_quantity_unit(issues, Quantity(cp.value, cp.unit), None, cpp)
            if not is_iri_ref(cp.sample_ref) and cp.sample_ref not in sample_ids:
                issues.append(ValidationIssue("E_REF", f"{cpp}.sample_ref", f"unresolved sample reference {cp.sample_ref!r}"))

    known_value_ids = property_ids | op_ids
    for i, op in enumerate(doc.math_operations):
        path = f"$.math_operations[{i}]"
        claim_id(op.id, path)
        if op.op == "difference" and len(op.inputs) != 2:
            issues.append(ValidationIssue("E_REF", f"{path}.inputs", "difference takes exactly 2 inputs"))
        if op.op == "divide" and len(op.inputs) != 2:
            issues.append(ValidationIssue("E_REF", f"{path}.inputs", "divide takes exactly 2 inputs"))
        if op.op == "scale":
            if len(op.inputs) != 1:
                issues.append(ValidationIssue("E_REF", f"{path}.inputs", "scale takes exactly 1 input"))
            if op.scalar is None:
                issues.append(ValidationIssue("E_REF", f"{path}.scalar", "scale requires a scalar"))
        if op.op == "linear_fit" and len(op.series) < 2:
            issues.append(ValidationIssue("E_REF", f"{path}.inputs", "linear_fit requires at least 2 series points"))
        refs = [v.ref for v in op.inputs if v.ref is not None]
        refs += [pt.y.ref for pt in op.series if pt.y.ref is not None]
        for ref in refs:
            if not is_iri_ref(ref) and ref not in known_value_ids:
                issues.append(ValidationIssue("E_REF", f"{path}.inputs", f"unresolved property reference {ref!r}"))
        if op.output.name not in PROPERTY_NAMES:
            issues.append(ValidationIssue("E_UNIT", f"{path}.output.name", f"property name {op.output.name!r} is not in the controlled list"))
        _check_quantity_unit(issues, Quantity(0.0, op.output.unit), None, f"{path}.output.unit")

    return issues


def report_to_text(issues: list[ValidationIssue]) -> str:
    if not issues:
        return "OK\n"
    return "".join(f"{it.code} {it.path}: {it.message}\n" for it in issues)


def report_to_json_lines(issues: list[ValidationIssue]) -> str:
    return "".join(
        json.dumps({"code": it.code, "path": it.path, "message": it.message}) + "\n" for it in issues
    )
