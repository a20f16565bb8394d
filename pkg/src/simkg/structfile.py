"""Reading and writing the artifact's JSON structure format.

Layout (format tag "simkg-structure-v1"):

    {
      "format": "simkg-structure-v1",
      "species": ["Cu", "Cu", ...],
      "positions": [[x, y, z], ...],        # cartesian angstrom, optional
      "cell": [[...], [...], [...]],        # row vectors, angstrom, optional
      "pbc": [true, true, true]             # optional
    }

Floats are written with Python's shortest round-trip repr, so a structure
file re-read yields bit-identical coordinates.
"""
from __future__ import annotations

import json
from pathlib import Path

FORMAT_TAG = "simkg-structure-v1"


def structure_to_dict(
    species: list[str],
    positions: list[tuple[float, float, float]] | None,
    cell: list[list[float]] | None,
    pbc: list[bool] | None,
) -> dict:
    out: dict = {"format": FORMAT_TAG, "species": list(species)}
    if positions is not None:
        out["positions"] = [[float(x), float(y), float(z)] for x, y, z in positions]
    if cell is not None:
        out["cell"] = [[float(v) for v in row] for row in cell]
    if pbc is not None:
        out["pbc"] = [bool(b) for b in pbc]
    return out


def write_structure_json(path: str | Path, species, positions, cell, pbc) -> None:
    Path(path).write_text(
        json.dumps(structure_to_dict(species, positions, cell, pbc), indent=1) + "\n",
        encoding="utf-8",
    )


def read_structure_json(path: str | Path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or data.get("format") != FORMAT_TAG:
        raise ValueError(f"{path}: not a {FORMAT_TAG} file")
    return data
