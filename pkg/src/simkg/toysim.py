"""Deterministic Lennard-Jones molecular statics and at-source capture.

A small pair-potential engine (truncated-and-shifted LJ, steepest-descent
minimization with backtracking) generates genuine vacancy-formation
workflows whose metadata is captured at source: the same template documents
legacy ingestion consumes are emitted here by the running code, with every
engine parameter recorded. This closes the capture - graph - trace -
reconstruct - re-execute loop without any external simulation code.

Everything is bitwise deterministic for a fixed seed: summation order is
fixed, the removed-atom choice is seeded, and identifiers are pre-minted
with a seeded minter.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from . import SOFTWARE_NAME, __version__
from .errors import (
    CellTooSmallError,
    NonFiniteCoordinatesError,
    NonFiniteEnergyError,
)
from .graph.identifiers import IriMinter
from .registry import PREFIXES
from .templates import (
    CellSpec,
    CrystalSpec,
    CalculatedPropertySpec,
    DefectSpec,
    MathOpSection,
    OpInput,
    OutputSpec,
    PotentialSpec,
    Quantity,
    SampleSection,
    SoftwareSpec,
    TemplateDocument,
    WorkflowSection,
)

ENGINE_NAME = f"{SOFTWARE_NAME}-toysim"


@dataclass(frozen=True)
class LJParams:
    epsilon: float  # eV
    sigma: float  # angstrom
    cutoff: float  # angstrom

    def __post_init__(self):
        if self.epsilon <= 0 or self.sigma <= 0 or self.cutoff <= 0:
            raise ValueError("LJ parameters must be positive")
        if self.cutoff < 2.0 * self.sigma:
            raise ValueError("cutoff must be at least 2*sigma")

    @property
    def shift(self) -> float:
        """Pair energy at the cutoff; subtracted so E(cutoff) == 0 exactly."""
        sr6 = (self.sigma / self.cutoff) ** 6
        return 4.0 * self.epsilon * (sr6 * sr6 - sr6)


@dataclass
class Configuration:
    cell: list[list[float]]  # row vectors, angstrom
    pbc: list[bool]
    species: list[str]
    positions: list[tuple[float, float, float]]

    def positions_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float)

    def cell_array(self) -> np.ndarray:
        return np.asarray(self.cell, dtype=float)


@dataclass
class MinimizeSettings:
    step: float = 1.0  # angstrom per (eV/angstrom) of force
    force_tol: float = 1e-5  # eV/angstrom, max per-atom force norm
    max_iter: int = 2000


@dataclass
class MinimizeResult:
    config: Configuration
    energy: float
    iterations: int
    converged: bool


def _validate_config(config: Configuration, params: LJParams) -> tuple[np.ndarray, np.ndarray]:
    pos = config.positions_array()
    cell = config.cell_array()
    if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(cell)):
        raise NonFiniteCoordinatesError("configuration contains non-finite values")
    volume = abs(float(np.linalg.det(cell)))
    if volume == 0.0:
        raise CellTooSmallError("cell is singular")
    for k in range(3):
        if config.pbc[k]:
            cross = np.cross(cell[(k + 1) % 3], cell[(k + 2) % 3])
            width = volume / float(np.linalg.norm(cross))
            if width <= 2.0 * params.cutoff:
                raise CellTooSmallError(
                    f"cell width {width:.3f} A along axis {k} does not exceed twice the cutoff"
                )
    return pos, cell


def _pair_table(pos: np.ndarray, cell: np.ndarray, pbc: list[bool]):
    """Unique pairs (i<j) with minimum-image displacement and distance."""
    n = len(pos)
    inv = np.linalg.inv(cell)
    frac = pos @ inv
    d = frac[:, None, :] - frac[None, :, :]
    for k in range(3):
        if pbc[k]:
            d[:, :, k] -= np.round(d[:, :, k])
    dcart = d @ cell
    r2 = np.einsum("ijk,ijk->ij", dcart, dcart)
    iu, ju = np.triu_indices(n, k=1)
    return iu, ju, dcart[iu, ju], np.sqrt(r2[iu, ju])


def lj_energy(config: Configuration, params: LJParams) -> float:
    """Total truncated-and-shifted LJ energy over unique pairs within cutoff."""
    pos, cell = _validate_config(config, params)
    if len(pos) < 2:
        return 0.0
    iu, ju, _vecs, r = _pair_table(pos, cell, config.pbc)
    mask = r < params.cutoff
    r_in = r[mask]
    if r_in.size == 0:
        return 0.0
    if np.any(r_in == 0.0):
        k = int(np.argmin(r[mask] if mask.any() else r))
        raise NonFiniteEnergyError(
            "coincident atoms", pair=(int(iu[mask][k]), int(ju[mask][k])), distance=0.0
        )
    sr6 = (params.sigma / r_in) ** 6
    pair_e = 4.0 * params.epsilon * (sr6 * sr6 - sr6) - params.shift
    total = float(np.sum(pair_e))
    if not np.isfinite(total):
        k = int(np.argmin(r_in))
        raise NonFiniteEnergyError(
            f"energy overflow at pair distance {r_in[k]:.3e} A",
            pair=(int(iu[mask][k]), int(ju[mask][k])),
            distance=float(r_in[k]),
        )
    return total


def lj_forces(config: Configuration, params: LJParams) -> np.ndarray:
    """Analytic forces (N x 3, eV/angstrom); gradient of lj_energy."""
    pos, cell = _validate_config(config, params)
    forces = np.zeros_like(pos)
    if len(pos) < 2:
        return forces
    iu, ju, vecs, r = _pair_table(pos, cell, config.pbc)
    mask = (r < params.cutoff) & (r > 0.0)
    r_in = r[mask]
    if r_in.size == 0:
        return forces
    sr6 = (params.sigma / r_in) ** 6
    # -dU/dr / r ; the shift constant does not contribute to forces
    coeff = 24.0 * params.epsilon * (2.0 * sr6 * sr6 - sr6) / (r_in * r_in)
    pair_f = coeff[:, None] * vecs[mask]
    np.add.at(forces, iu[mask], pair_f)
    np.add.at(forces, ju[mask], -pair_f)
    if not np.all(np.isfinite(forces)):
        raise NonFiniteEnergyError("force overflow for overlapping atoms")
    return forces


def minimize(
    config: Configuration, params: LJParams, settings: MinimizeSettings | None = None
) -> MinimizeResult:
    """Steepest descent with backtracking halving on energy increase.

    Accepted steps never increase the energy; returns converged=False when
    max_iter is reached or the step underflows before the force tolerance.
    """
    settings = settings or MinimizeSettings()
    pos = config.positions_array().copy()
    cell = config.cell
    energy = lj_energy(config, params)
    step = settings.step
    iterations = 0
    converged = False

    def current() -> Configuration:
        return Configuration(
            cell=[list(row) for row in cell],
            pbc=list(config.pbc),
            species=list(config.species),
            positions=[(float(x), float(y), float(z)) for x, y, z in pos],
        )

    for _ in range(settings.max_iter):
        forces = lj_forces(current(), params)
        fmax = float(np.max(np.linalg.norm(forces, axis=1))) if len(pos) else 0.0
        if fmax < settings.force_tol:
            converged = True
            break
        trial = step
        accepted = False
        while trial > 1e-16:
            trial_pos = pos + trial * forces
            trial_config = Configuration(
                cell=[list(row) for row in cell],
                pbc=list(config.pbc),
                species=list(config.species),
                positions=[tuple(map(float, q)) for q in trial_pos],
            )
            try:
                trial_energy = lj_energy(trial_config, params)
            except NonFiniteEnergyError:
                trial /= 2.0
                continue
            if trial_energy <= energy:
                pos = trial_pos
                energy = trial_energy
                accepted = True
                break
            trial /= 2.0
        if not accepted:
            break
        step = min(trial * 1.1, settings.step)
        iterations += 1
    else:
        forces = lj_forces(current(), params)
        fmax = float(np.max(np.linalg.norm(forces, axis=1)))
        converged = fmax < settings.force_tol

    return MinimizeResult(config=current(), energy=energy, iterations=iterations, converged=converged)


# --- structure building --------------------------------------------------------

FCC_BASIS = ((0.0, 0.0, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5), (0.5, 0.5, 0.0))


def build_fcc(element: str, lattice_param: float, supercell: tuple[int, int, int]) -> Configuration:
    nx, ny, nz = supercell
    positions = []
    for ix in range(nx):
        for iy in range(ny):
            for iz in range(nz):
                for bx, by, bz in FCC_BASIS:
                    positions.append(
                        (
                            (ix + bx) * lattice_param,
                            (iy + by) * lattice_param,
                            (iz + bz) * lattice_param,
                        )
                    )
    cell = [
        [nx * lattice_param, 0.0, 0.0],
        [0.0, ny * lattice_param, 0.0],
        [0.0, 0.0, nz * lattice_param],
    ]
    return Configuration(cell=cell, pbc=[True, True, True], species=[element] * len(positions), positions=positions)


# --- workflow generation ---------------------------------------------------------


@dataclass
class VacancyRun:
    documents: list[TemplateDocument]
    e_bulk: float
    e_defect: float
    n_bulk: int
    n_defect: int
    e_formation: float
    removed_index: int
    bulk_config: Configuration
    defect_config: Configuration
    relaxed_bulk: Configuration
    relaxed_defect: Configuration
    iterations_bulk: int
    iterations_defect: int
    iris: dict[str, str] = field(default_factory=dict)


def _engine_parameters(params: LJParams, settings: MinimizeSettings) -> dict[str, Quantity]:
    return {
        "epsilon": Quantity(params.epsilon, "EV"),
        "sigma": Quantity(params.sigma, "ANGSTROM"),
        "cutoff": Quantity(params.cutoff, "ANGSTROM"),
        "force_tolerance": Quantity(settings.force_tol, "EV-PER-ANGSTROM"),
        "step_size": Quantity(settings.step, "ANGSTROM"),
        "max_iterations": Quantity(float(settings.max_iter), "UNITLESS"),
    }


def _record_digest(seed: int, tag: str, element: str, lattice_param: float, supercell, params: LJParams) -> str:
    import hashlib

    payload = f"{ENGINE_NAME}|{tag}|{seed}|{element}|{lattice_param!r}|{supercell}|{params.epsilon!r}|{params.sigma!r}|{params.cutoff!r}"
    return hashlib.sha256(payload.encode()).hexdigest()


def run_vacancy_workflow(
    lattice_param: float,
    supercell: tuple[int, int, int],
    params: LJParams,
    seed: int = 0,
    element: str = "Ar",
    settings: MinimizeSettings | None = None,
) -> VacancyRun:
    """Run bulk and vacancy relaxations and capture both as template documents.

    Returns two documents: the bulk record, and the defect record carrying
    the scale/difference operations that derive the vacancy formation
    energy. All identifiers are pre-minted with the seeded minter, so a
    fixed seed reproduces byte-identical templates.
    """
    settings = settings or MinimizeSettings()
    minter = IriMinter(seed)
    rng = random.Random(seed)

    bulk = build_fcc(element, lattice_param, supercell)
    n_bulk = len(bulk.positions)
    relaxed_bulk = minimize(bulk, params, settings)

    removed = rng.randrange(n_bulk)
    defect_positions = [p for i, p in enumerate(bulk.positions) if i != removed]
    defect = Configuration(
        cell=[list(row) for row in bulk.cell],
        pbc=list(bulk.pbc),
        species=[element] * len(defect_positions),
        positions=defect_positions,
    )
    n_defect = len(defect.positions)
    relaxed_defect = minimize(defect, params, settings)

    ratio = n_defect / n_bulk
    e_formation = relaxed_defect.energy - ratio * relaxed_bulk.energy

    bulk_sample = str(minter.mint("sample"))
    bulk_activity = str(minter.mint("activity"))
    bulk_property = str(minter.mint("property"))
    defect_sample = str(minter.mint("sample"))
    defect_activity = str(minter.mint("activity"))
    defect_property = str(minter.mint("property"))
    scale_op = str(minter.mint("operation"))
    diff_op = str(minter.mint("operation"))

    software = SoftwareSpec(name=ENGINE_NAME, version=__version__)
    potential = PotentialSpec(
        label=f"lennard-jones/internal/{element}",
        kind="classical",
    )
    engine_params = _engine_parameters(params, settings)
    crystal = CrystalSpec(name="fcc", space_group=225, lattice_parameter=Quantity(lattice_param, "ANGSTROM"))
    cell_spec = CellSpec(vectors=[list(row) for row in bulk.cell], pbc=list(bulk.pbc))

    bulk_doc = TemplateDocument(
        samples=[
            SampleSection(
                id=bulk_sample,
                label=f"{element} fcc bulk {n_bulk} atoms",
                composition=[(element, n_bulk)],
                crystal_structure=crystal,
                cell=cell_spec,
                positions=[(element, p) for p in bulk.positions],
                record_digest=_record_digest(seed, "bulk-sample", element, lattice_param, supercell, params),
            )
        ],
        workflows=[
            WorkflowSection(
                id=bulk_activity,
                method="molecular_statics",
                input_samples=[bulk_sample],
                software=software,
                potential=potential,
                calculated_properties=[
                    CalculatedPropertySpec(
                        id=bulk_property,
                        name="total_energy",
                        value=relaxed_bulk.energy,
                        unit="EV",
                        sample_ref=bulk_sample,
                    )
                ],
                record_digest=_record_digest(seed, "bulk", element, lattice_param, supercell, params),
            )
        ],
    )
    bulk_doc.workflows[0].parameters.extra = dict(engine_params)

    defect_doc = TemplateDocument(
        samples=[
            SampleSection(
                id=defect_sample,
                label=f"{element} fcc with one vacancy, {n_defect} atoms",
                composition=[(element, n_defect)],
                cell=cell_spec,
                positions=[(element, p) for p in defect.positions],
                defects=[DefectSpec(kind="vacancy", site_species=element)],
                derived_from=[bulk_sample],
                record_digest=_record_digest(seed, "defect-sample", element, lattice_param, supercell, params),
            )
        ],
        workflows=[
            WorkflowSection(
                id=defect_activity,
                method="molecular_statics",
                input_samples=[defect_sample],
                software=software,
                potential=potential,
                calculated_properties=[
                    CalculatedPropertySpec(
                        id=defect_property,
                        name="total_energy",
                        value=relaxed_defect.energy,
                        unit="EV",
                        sample_ref=defect_sample,
                    )
                ],
                record_digest=_record_digest(seed, "defect", element, lattice_param, supercell, params),
            )
        ],
        math_operations=[
            MathOpSection(
                id=scale_op,
                op="scale",
                inputs=[OpInput(ref=bulk_property)],
                scalar=ratio,
                output=OutputSpec(name="scaled_energy", unit="EV"),
            ),
            MathOpSection(
                id=diff_op,
                op="difference",
                inputs=[OpInput(ref=defect_property), OpInput(ref=scale_op)],
                output=OutputSpec(name="formation_energy", unit="EV"),
            ),
        ],
    )
    defect_doc.workflows[0].parameters.extra = dict(engine_params)

    return VacancyRun(
        documents=[bulk_doc, defect_doc],
        e_bulk=relaxed_bulk.energy,
        e_defect=relaxed_defect.energy,
        n_bulk=n_bulk,
        n_defect=n_defect,
        e_formation=e_formation,
        removed_index=removed,
        bulk_config=bulk,
        defect_config=defect,
        relaxed_bulk=relaxed_bulk.config,
        relaxed_defect=relaxed_defect.config,
        iterations_bulk=relaxed_bulk.iterations,
        iterations_defect=relaxed_defect.iterations,
        iris={
            "bulk_sample": bulk_sample,
            "bulk_activity": bulk_activity,
            "bulk_property": bulk_property,
            "defect_sample": defect_sample,
            "defect_activity": defect_activity,
            "defect_property": defect_property,
            "scale_operation": scale_op,
            "difference_operation": diff_op,
        },
    )
