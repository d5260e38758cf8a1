"""Structured triangulations of axis-aligned rectangles.

Vertices of ``build_structured(nx, ny, rect)`` are numbered row by row,
``k = j * (nx + 1) + i``.  Every grid cell is split along its lower-left to
upper-right diagonal into a lower and an upper triangle, both stored
counter-clockwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIDES = ("left", "right", "bottom", "top")

_AXIS_NORMALS = {
    "left": (-1.0, 0.0),
    "right": (1.0, 0.0),
    "bottom": (0.0, -1.0),
    "top": (0.0, 1.0),
}


class MeshError(ValueError):
    """Invalid mesh construction arguments."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation with edge connectivity and tagged boundary.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counter-clockwise
    edges : (E, 2) int array, each row sorted ascending
    cell_edges : (T, 3) int array
        Local edge ``k`` of a cell joins local vertices ``k`` and ``(k+1) % 3``.
    edge_triangles : tuple of tuples
        Incident cells of every edge.
    boundary_edges : (B,) int array
    boundary_sides : (B,) array of side tags
    boundary_normals : (B, 2) float array, outward unit normals
    rect : (x0, y0, x1, y1)
    grid : (nx, ny) for structured meshes, else None
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    cell_edges: np.ndarray
    edge_triangles: tuple
    boundary_edges: np.ndarray
    boundary_sides: np.ndarray
    boundary_normals: np.ndarray
    rect: tuple
    grid: tuple | None = None
    _side_edges: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_cells(self) -> int:
        return len(self.triangles)

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.rect
        return (x1 - x0) * (y1 - y0)

    def cell_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    def side_edges(self, side: str) -> np.ndarray:
        """Boundary edge indices (into ``edges``) carrying the given side tag."""
        return self.boundary_edges[self.boundary_sides == side]

    @classmethod
    def from_triangles(cls, vertices, triangles, rect=None, grid=None) -> "Mesh":
        """Build connectivity for arbitrary vertex/triangle arrays.

        No invariant is enforced here; use :func:`validate` for diagnostics.
        """
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        if rect is None:
            lo = vertices.min(axis=0)
            hi = vertices.max(axis=0)
            rect = (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

        local = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
        keys = np.sort(local, axis=2).reshape(-1, 2)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        cell_edges = inverse.reshape(-1, 3)

        incident: list[list[int]] = [[] for _ in range(len(edges))]
        for cell, row in enumerate(cell_edges):
            for e in row:
                incident[e].append(cell)
        edge_triangles = tuple(tuple(c) for c in incident)

        counts = np.array([len(c) for c in incident])
        bedges = np.flatnonzero(counts == 1)
        sides, normals = _tag_boundary(vertices, triangles, edges, bedges, edge_triangles, rect)
        return cls(
            vertices=vertices,
            triangles=triangles,
            edges=edges,
            cell_edges=cell_edges,
            edge_triangles=edge_triangles,
            boundary_edges=bedges,
            boundary_sides=sides,
            boundary_normals=normals,
            rect=tuple(float(r) for r in rect),
            grid=grid,
        )


def _tag_boundary(vertices, triangles, edges, bedges, edge_triangles, rect):
    x0, y0, x1, y1 = rect
    tol = 1e-12 * max(x1 - x0, y1 - y0, 1.0)
    sides = []
    normals = np.zeros((len(bedges), 2))
    for k, e in enumerate(bedges):
        a, b = vertices[edges[e]]
        if abs(a[0] - x0) <= tol and abs(b[0] - x0) <= tol:
            side = "left"
        elif abs(a[0] - x1) <= tol and abs(b[0] - x1) <= tol:
            side = "right"
        elif abs(a[1] - y0) <= tol and abs(b[1] - y0) <= tol:
            side = "bottom"
        elif abs(a[1] - y1) <= tol and abs(b[1] - y1) <= tol:
            side = "top"
        else:
            side = "interior"
        sides.append(side)
        if side in _AXIS_NORMALS:
            normals[k] = _AXIS_NORMALS[side]
        else:
            t = b - a
            n = np.array([t[1], -t[0]]) / np.hypot(*t)
            centroid = vertices[triangles[edge_triangles[e][0]]].mean(axis=0)
            if np.dot(n, 0.5 * (a + b) - centroid) < 0:
                n = -n
            normals[k] = n
    return np.array(sides, dtype=object), normals


def build_structured(nx: int, ny: int, rect=(0.0, 0.0, 1.0, 1.0)) -> Mesh:
    """Uniform triangulation of ``rect = (x0, y0, x1, y1)`` with ``nx`` by ``ny`` cells."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"subdivision counts must be positive integers, got nx={nx}, ny={ny}")
    x0, y0, x1, y1 = (float(r) for r in rect)
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"degenerate rectangle {rect!r}: need x1 > x0 and y1 > y0")
    nx, ny = int(nx), int(ny)

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh.from_triangles(vertices, triangles, rect=(x0, y0, x1, y1), grid=(nx, ny))


@dataclass(frozen=True)
class BoundaryPartition:
    """Split of the four rectangle sides into pressure-Dirichlet and Neumann parts."""

    dirichlet_sides: frozenset = frozenset()
    neumann_sides: frozenset = frozenset(SIDES)

    def __post_init__(self):
        d = frozenset(self.dirichlet_sides)
        n = frozenset(self.neumann_sides)
        object.__setattr__(self, "dirichlet_sides", d)
        object.__setattr__(self, "neumann_sides", n)
        unknown = (d | n) - set(SIDES)
        if unknown:
            raise ValueError(f"unknown side tags {sorted(unknown)}")
        if d & n:
            raise ValueError(f"sides {sorted(d & n)} are both Dirichlet and Neumann")
        if d and n and (d | n) != set(SIDES):
            raise ValueError("a mixed partition must cover all four sides")

    @classmethod
    def neumann(cls) -> "BoundaryPartition":
        return cls(frozenset(), frozenset(SIDES))

    @classmethod
    def dirichlet(cls) -> "BoundaryPartition":
        return cls(frozenset(SIDES), frozenset())

    @classmethod
    def mixed(cls, dirichlet_sides) -> "BoundaryPartition":
        d = frozenset(dirichlet_sides)
        if not d:
            raise ValueError("mixed pressure conditions need a nonempty Dirichlet part")
        return cls(d, frozenset(SIDES) - d)

    @property
    def is_pure_neumann(self) -> bool:
        return not self.dirichlet_sides


def boundary_edges_of(mesh: Mesh, part: BoundaryPartition, which: str) -> np.ndarray:
    """Boundary edge indices on the Dirichlet or Neumann part of ``part``."""
    if which == "dirichlet":
        sides = part.dirichlet_sides
    elif which == "neumann":
        sides = part.neumann_sides
    else:
        raise ValueError(f"which must be 'dirichlet' or 'neumann', got {which!r}")
    mask = np.isin(mesh.boundary_sides, list(sides))
    return mesh.boundary_edges[mask]


def validate(mesh: Mesh) -> list[str]:
    """Return every invariant violation found; an empty list means the mesh is valid."""
    problems = []
    tris = np.asarray(mesh.triangles)
    verts = np.asarray(mesh.vertices)
    if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
        return ["triangle references a vertex index out of range"]

    p = verts[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    for k in np.flatnonzero(signed <= 0):
        problems.append(f"negative area at cell {k}")

    # recount from the raw triangles so a tampered connectivity table is still caught
    keys = np.sort(tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    edges, counts = np.unique(keys, axis=0, return_counts=True)
    for e, c in zip(edges, counts):
        if c > 2:
            problems.append(f"edge with {c} incident triangles: vertices ({e[0]}, {e[1]})")

    V, E, T = len(verts), len(edges), len(tris)
    if V - E + T + 1 != 2:
        problems.append(f"Euler relation fails: V - E + (T + 1) = {V - E + T + 1}")

    for k, e in enumerate(mesh.boundary_edges):
        n = mesh.boundary_normals[k]
        if abs(np.hypot(*n) - 1.0) > 1e-12:
            problems.append(f"boundary normal of edge {e} is not unit length")
            continue
        a, b = verts[mesh.edges[e]]
        cell = mesh.edge_triangles[e][0]
        centroid = verts[tris[cell]].mean(axis=0)
        if np.dot(n, 0.5 * (a + b) - centroid) <= 0:
            problems.append(f"boundary normal of edge {e} points inward")
    return problems
