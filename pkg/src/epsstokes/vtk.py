"""Legacy-VTK (ASCII 2.0) export of meshes and finite-element fields."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dofs import Field, build_dofmap
from .mesh import Mesh

_VTK_TRIANGLE = 5


def _header(title: str) -> list[str]:
    return ["# vtk DataFile Version 2.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]


def _grid_lines(points: np.ndarray, triangles: np.ndarray) -> list[str]:
    lines = [f"POINTS {len(points)} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in points]
    lines.append(f"CELLS {len(triangles)} {4 * len(triangles)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in triangles]
    lines.append(f"CELL_TYPES {len(triangles)}")
    lines += [str(_VTK_TRIANGLE)] * len(triangles)
    return lines


def write_mesh(path, mesh: Mesh, title: str = "mesh") -> None:
    text = _header(title) + _grid_lines(mesh.vertices, mesh.triangles)
    Path(path).write_text("\n".join(text) + "\n")


def refined_triangles(mesh: Mesh) -> np.ndarray:
    """Each cell split into four through its edge midpoints (P2 node numbering)."""
    V = mesh.n_vertices
    t = mesh.triangles
    m = V + mesh.cell_edges  # midpoint of local edge k joins local vertices k, k+1
    return np.concatenate([
        np.stack([t[:, 0], m[:, 0], m[:, 2]], axis=1),
        np.stack([m[:, 0], t[:, 1], m[:, 1]], axis=1),
        np.stack([m[:, 2], m[:, 1], t[:, 2]], axis=1),
        np.stack([m[:, 0], m[:, 1], m[:, 2]], axis=1),
    ])


def write_fields(path, mesh: Mesh, fields: dict[str, Field], title: str = "solution") -> None:
    """Write fields as point data on the vertices + edge midpoints grid.

    P2 fields are exact there; P1 fields are evaluated at the midpoints.
    """
    points = build_dofmap(mesh, "P2").node_coords
    text = _header(title) + _grid_lines(points, refined_triangles(mesh))
    text.append(f"POINT_DATA {len(points)}")
    for name, f in fields.items():
        if f.mesh is not mesh:
            raise ValueError(f"field {name!r} lives on a different mesh")
        values = f.evaluate(points)
        if f.ncomp == 1:
            text += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            text += [f"{v:.17g}" for v in values]
        else:
            text.append(f"VECTORS {name} double")
            text += [f"{a:.17g} {b:.17g} 0" for a, b in values]
    Path(path).write_text("\n".join(text) + "\n")
