"""Instance identifiers: UUID-based minting and content-addressed structure hashes.

Instance-level resources (samples, activities, properties, operations) get
UUID IRIs. Structure representations get deterministic hash IRIs computed
from a canonical serialization, so identical structures are referenced by
the same IRI across ingestion runs and datasets.

The canonical form is permutation-invariant (atoms are sorted within each
species) but deliberately not invariant under rigid rotation or supercell
re-expression: two structures hash equal exactly when their canonical
representations coincide.
"""
from __future__ import annotations

import hashlib
import math
import random
import uuid
from typing import TYPE_CHECKING

import numpy as np

from ..errors import MissingCellError
from ..registry import PREFIXES
from .store import Iri

if TYPE_CHECKING:  # pragma: no cover
    from ..models import AtomicScaleSample

INSTANCE_KINDS = ("sample", "activity", "property", "operation")


class IriMinter:
    """Mints instance IRIs; seedable for reproducible workflows and tests."""

    def __init__(self, seed: int | None = None):
        self._rng = random.Random(seed) if seed is not None else None

    def mint(self, kind: str) -> Iri:
        if kind not in INSTANCE_KINDS:
            raise ValueError(f"unknown instance kind: {kind!r}")
        if self._rng is None:
            u = uuid.uuid4()
        else:
            u = uuid.UUID(bytes=self._rng.randbytes(16), version=4)
        return Iri(PREFIXES[kind] + str(u))


_DEFAULT_MINTER = IriMinter()


def mint_instance_iri(kind: str) -> Iri:
    """Mint a fresh `<kind-prefix>/<uuid4>` IRI; distinct across calls."""
    return _DEFAULT_MINTER.mint(kind)


def _round8(x: float) -> float:
    r = round(float(x), 8)
    return 0.0 if r == 0.0 else r  # normalize -0.0


def _fmt(x: float) -> str:
    return f"{_round8(x):.8f}"


def canonical_structure_text(
    composition: list[tuple[str, int]],
    cell_vectors: list[list[float]] | None,
    pbc: list[bool] | None,
    positions: list[tuple[str, tuple[float, float, float]]] | None,
) -> str:
    """Canonical serialization whose digest is the structure identifier.

    Composition is sorted by element symbol; cell vectors are rounded to
    1e-8 angstrom in row-major order; when positions are present they are
    converted to fractional coordinates, wrapped into [0, 1), rounded to
    1e-8, and sorted lexicographically within each species. Without
    positions the hash covers composition and cell only (degraded mode).
    """
    if cell_vectors is None:
        raise MissingCellError("structure hashing requires a simulation cell")
    lines = []
    comp = sorted((el, int(n)) for el, n in composition)
    lines.append("composition " + ",".join(f"{el}:{n}" for el, n in comp))
    flat = [x for row in cell_vectors for x in row]
    lines.append("cell " + " ".join(_fmt(x) for x in flat))
    lines.append("pbc " + "".join("T" if b else "F" for b in (pbc or [True, True, True])))
    if positions:
        cell = np.array(cell_vectors, dtype=float)
        inv = np.linalg.inv(cell)
        by_species: dict[str, list[tuple[float, float, float]]] = {}
        for el, xyz in positions:
            frac = np.asarray(xyz, dtype=float) @ inv
            frac = frac - np.floor(frac)
            wrapped = []
            for f in frac:
                r = _round8(float(f))
                r = r % 1.0  # rounding may push 0.999999995 up to exactly 1.0
                wrapped.append(_round8(r))
            by_species.setdefault(el, []).append(tuple(wrapped))
        for el in sorted(by_species):
            coords = sorted(by_species[el])
            body = ";".join(",".join(_fmt(c) for c in xyz) for xyz in coords)
            lines.append(f"pos {el} {body}")
    return "\n".join(lines) + "\n"


def structure_hash(sample: "AtomicScaleSample") -> Iri:
    """Content-addressed IRI for a sample's structure representation."""
    if sample.cell is None:
        raise MissingCellError(f"sample {sample.iri} has no cell; cannot hash structure")
    positions = sample.positions if sample.positions else None
    if positions is not None:
        for _el, xyz in positions:
            if not all(math.isfinite(c) for c in xyz):
                raise ValueError("non-finite coordinates in sample positions")
    text = canonical_structure_text(sample.composition, sample.cell.vectors, sample.cell.pbc, positions)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:32]
    return Iri(PREFIXES["sample"] + "structure/" + digest)
