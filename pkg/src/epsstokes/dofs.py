"""Degree-of-freedom maps and finite-element fields.

Scalar P2 nodes are the mesh vertices followed by the edge midpoints, so
node ``V + e`` sits on edge ``e``.  The 2-component P2 space interleaves
components per node: dof ``2 * node + c``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import affine_maps, basis_tables, physical_gradients, quadrature_rule
from .mesh import SIDES, BoundaryPartition, Mesh

SPACE_KINDS = ("P1", "P2", "P2vec")


@dataclass(frozen=True, eq=False)
class DofMap:
    mesh: Mesh
    kind: str
    partition: BoundaryPartition
    node_coords: np.ndarray
    cell_nodes: np.ndarray
    side_nodes: dict

    @property
    def family(self) -> str:
        return "P1" if self.kind == "P1" else "P2"

    @property
    def ncomp(self) -> int:
        return 2 if self.kind == "P2vec" else 1

    @property
    def n_nodes(self) -> int:
        return len(self.node_coords)

    @property
    def n_dofs(self) -> int:
        return self.ncomp * self.n_nodes

    @property
    def cell_dofs(self) -> np.ndarray:
        """Local-to-global table; vector spaces use local order ``2 * a + c``."""
        if self.ncomp == 1:
            return self.cell_nodes
        n = self.cell_nodes
        return np.stack([2 * n, 2 * n + 1], axis=2).reshape(len(n), -1)

    def nodes_to_dofs(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        if self.ncomp == 1:
            return nodes
        return np.stack([2 * nodes, 2 * nodes + 1], axis=1).ravel()

    def boundary_nodes(self, sides=SIDES) -> np.ndarray:
        if not sides:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([self.side_nodes[s] for s in sides]))

    def boundary_dofs(self, sides=SIDES) -> np.ndarray:
        return self.nodes_to_dofs(self.boundary_nodes(sides))

    @property
    def dirichlet_dofs(self) -> np.ndarray:
        """Dofs on the closure of the partition's Dirichlet sides (corners included)."""
        return self.boundary_dofs(tuple(sorted(self.partition.dirichlet_sides)))


def build_dofmap(mesh: Mesh, kind: str, part: BoundaryPartition | None = None) -> DofMap:
    if kind not in SPACE_KINDS:
        raise ValueError(f"unknown space kind {kind!r}; expected one of {SPACE_KINDS}")
    part = part if part is not None else BoundaryPartition.neumann()
    V = mesh.n_vertices
    if kind == "P1":
        coords = mesh.vertices
        cell_nodes = mesh.triangles
    else:
        coords = np.vstack([mesh.vertices, mesh.edge_midpoints()])
        cell_nodes = np.hstack([mesh.triangles, V + mesh.cell_edges])

    side_nodes = {}
    for side in SIDES:
        e = mesh.side_edges(side)
        nodes = [mesh.edges[e].ravel()]
        if kind != "P1":
            nodes.append(V + e)
        side_nodes[side] = np.unique(np.concatenate(nodes)).astype(np.int64)
    return DofMap(mesh, kind, part, coords, np.ascontiguousarray(cell_nodes), side_nodes)


def _call(f, x, y, ncomp):
    out = f(x, y)
    if ncomp == 1:
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape)
    fx, fy = out
    return np.stack(
        [np.broadcast_to(np.asarray(fx, dtype=float), x.shape),
         np.broadcast_to(np.asarray(fy, dtype=float), x.shape)],
        axis=-1,
    )


def evaluate_function(f, points, ncomp: int = 1) -> np.ndarray:
    """Evaluate a vectorized ``f(x, y)``; failures name the first offending location."""
    points = np.asarray(points, dtype=float)
    x, y = points[..., 0], points[..., 1]
    try:
        with np.errstate(all="raise"):
            values = _call(f, x, y, ncomp)
    except Exception as exc:
        flat = points.reshape(-1, 2)
        for px, py in flat:
            try:
                with np.errstate(all="raise"):
                    _call(f, np.array(px), np.array(py), ncomp)
            except Exception as inner:
                raise ValueError(f"evaluation failed at ({px:.17g}, {py:.17g}): {inner}") from inner
        raise ValueError(f"evaluation failed: {exc}") from exc
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.argwhere(bad.reshape(len(points.reshape(-1, 2)), -1).any(axis=1))[0, 0]
        px, py = points.reshape(-1, 2)[idx]
        raise ValueError(f"non-finite value at ({px:.17g}, {py:.17g})")
    return np.array(values)


@dataclass(eq=False)
class Field:
    dofmap: DofMap
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.dofmap.n_dofs,):
            raise ValueError(
                f"coefficient vector has shape {self.coefficients.shape}, "
                f"space needs ({self.dofmap.n_dofs},)"
            )

    @property
    def mesh(self) -> Mesh:
        return self.dofmap.mesh

    @property
    def ncomp(self) -> int:
        return self.dofmap.ncomp

    def nodal(self) -> np.ndarray:
        """Coefficients as ``(nodes,)`` or ``(nodes, 2)``."""
        if self.ncomp == 1:
            return self.coefficients
        return self.coefficients.reshape(-1, 2)

    def copy_with(self, coefficients) -> "Field":
        return Field(self.dofmap, coefficients)

    def __add__(self, other: "Field") -> "Field":
        _check_same_space(self, other)
        return self.copy_with(self.coefficients + other.coefficients)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_space(self, other)
        return self.copy_with(self.coefficients - other.coefficients)

    def __mul__(self, alpha: float) -> "Field":
        return self.copy_with(alpha * self.coefficients)

    __rmul__ = __mul__

    def on_cells(self, ref_points) -> tuple[np.ndarray, np.ndarray]:
        """Values and physical gradients at reference points of every cell.

        Returns ``(T, nq)`` / ``(T, nq, 2)`` for scalars and ``(T, nq, 2)`` /
        ``(T, nq, 2, 2)`` for vectors, gradient index order ``[..., comp, dir]``.
        """
        vals, rgrads = basis_tables(self.dofmap.family, ref_points)
        _, _, inv_t, _ = affine_maps(self.mesh)
        grads = physical_gradients(rgrads, inv_t)
        local = self.nodal()[self.dofmap.cell_nodes]
        if self.ncomp == 1:
            return (np.einsum("qb,cb->cq", vals, local),
                    np.einsum("cqbi,cb->cqi", grads, local))
        return (np.einsum("qb,cbk->cqk", vals, local),
                np.einsum("cqbi,cbk->cqki", grads, local))

    def evaluate(self, points, with_gradient: bool = False):
        """Point evaluation at physical coordinates ``(N, 2)``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        cells, ref = locate(self.mesh, points)
        vals, rgrads = basis_tables(self.dofmap.family, ref)
        local = self.nodal()[self.dofmap.cell_nodes[cells]]
        if self.ncomp == 1:
            v = np.einsum("nb,nb->n", vals, local)
        else:
            v = np.einsum("nb,nbk->nk", vals, local)
        if not with_gradient:
            return v
        _, _, inv_t, _ = affine_maps(self.mesh)
        g = np.einsum("nij,nbj->nbi", inv_t[cells], rgrads)
        if self.ncomp == 1:
            return v, np.einsum("nbi,nb->ni", g, local)
        return v, np.einsum("nbi,nbk->nki", g, local)


def _check_same_space(a: Field, b: Field):
    if a.dofmap is not b.dofmap and (
        a.dofmap.kind != b.dofmap.kind or a.dofmap.n_dofs != b.dofmap.n_dofs
    ):
        raise ValueError("fields live on different spaces")


def locate(mesh: Mesh, points) -> tuple[np.ndarray, np.ndarray]:
    """Containing cell and reference coordinates for each point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x0, y0, x1, y1 = mesh.rect
    tol = 1e-12 * max(x1 - x0, y1 - y0)
    outside = (
        (points[:, 0] < x0 - tol) | (points[:, 0] > x1 + tol)
        | (points[:, 1] < y0 - tol) | (points[:, 1] > y1 + tol)
    )
    if outside.any():
        p = points[np.argmax(outside)]
        raise ValueError(f"point ({p[0]}, {p[1]}) lies outside the mesh rectangle")
    J, _, inv_t, origin = affine_maps(mesh)

    if mesh.grid is not None:
        nx, ny = mesh.grid
        sx = (points[:, 0] - x0) / (x1 - x0) * nx
        sy = (points[:, 1] - y0) / (y1 - y0) * ny
        i = np.clip(np.floor(sx).astype(np.int64), 0, nx - 1)
        j = np.clip(np.floor(sy).astype(np.int64), 0, ny - 1)
        upper = (sy - j) > (sx - i)
        cells = 2 * (j * nx + i) + upper
    else:
        # brute force over all cells; fine for the small unstructured meshes used in tests
        d = points[:, None, :] - origin[None, :, :]
        ref_all = np.einsum("cji,ncj->nci", inv_t, d)
        lam = np.stack([1 - ref_all[..., 0] - ref_all[..., 1], ref_all[..., 0], ref_all[..., 1]], -1)
        cells = np.argmax(lam.min(axis=2), axis=1)

    d = points - origin[cells]
    ref = np.einsum("nji,nj->ni", inv_t[cells], d)
    return cells, np.clip(ref, 0.0, 1.0)


def interpolate(dofmap: DofMap, f) -> Field:
    """Nodal Lagrange interpolant of ``f(x, y)`` (a pair of arrays for vector spaces)."""
    values = evaluate_function(f, dofmap.node_coords, dofmap.ncomp)
    return Field(dofmap, values.ravel())


def _integral(field: Field) -> float:
    rule = quadrature_rule("triangle", 4)
    vals, _ = field.on_cells(rule.points)
    _, det, _, _ = affine_maps(field.mesh)
    return float(np.sum(det * (vals @ rule.weights)))


def mean_value(field: Field, mesh: Mesh | None = None) -> float:
    """Average of a scalar field over the domain."""
    if field.ncomp != 1:
        raise ValueError("mean_value needs a scalar field")
    mesh = mesh if mesh is not None else field.mesh
    return _integral(field) / mesh.area


def subtract_mean(field: Field, mesh: Mesh | None = None) -> Field:
    # constants are exactly representable: every basis family sums to one
    return field.copy_with(field.coefficients - mean_value(field, mesh))
