"""Bilinear forms, load functionals and Dirichlet elimination.

Matrices are ``scipy.sparse.csr_matrix`` with duplicates summed.  Rows index
the test space and columns the trial space, e.g. the coupling block
``grad_p_dot_v`` has entries ``int grad(p_j) . phi_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .dofs import DofMap, evaluate_function
from .elements import affine_maps, basis_tables, physical_gradients, quadrature_rule

FORMS = ("laplacian_vector", "laplacian_scalar", "grad_p_dot_v", "div_u_times_q", "mass")
LOAD_KINDS = ("body_force", "div_F_volume", "neumann_boundary")

DEFAULT_DEGREE = 4
EDGE_DEGREE = 3


def _tables(space: DofMap, rule, inv_t):
    vals, rgrads = basis_tables(space.family, rule.points)
    return vals, physical_gradients(rgrads, inv_t)


def _expand_vector(local: np.ndarray) -> np.ndarray:
    """Scalar local matrix ``(T, a, b)`` to the component-diagonal ``(T, 2a, 2b)`` block."""
    T, na, nb = local.shape
    out = np.zeros((T, na, 2, nb, 2))
    out[:, :, 0, :, 0] = local
    out[:, :, 1, :, 1] = local
    return out.reshape(T, 2 * na, 2 * nb)


def element_matrices(mesh, row_space: DofMap, col_space: DofMap, form: str,
                     degree: int = DEFAULT_DEGREE) -> np.ndarray:
    """Local matrices ``(T, n_row_local, n_col_local)`` of a form on every cell."""
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
    expected = {
        "laplacian_vector": (2, 2),
        "laplacian_scalar": (1, 1),
        "grad_p_dot_v": (2, 1),
        "div_u_times_q": (1, 2),
    }
    got = (row_space.ncomp, col_space.ncomp)
    if form == "mass":
        if got not in ((1, 1), (2, 2)):
            raise ValueError("mass form needs two scalar or two vector spaces")
    elif got != expected[form]:
        raise ValueError(
            f"form {form!r} needs (row, col) component counts {expected[form]}, got {got}"
        )

    rule = quadrature_rule("triangle", degree)
    _, det, inv_t, _ = affine_maps(mesh)
    dx = det[:, None] * rule.weights[None, :]
    vr, gr = _tables(row_space, rule, inv_t)
    vc, gc = _tables(col_space, rule, inv_t)

    if form in ("laplacian_scalar", "laplacian_vector"):
        local = np.einsum("cq,cqai,cqbi->cab", dx, gr, gc)
        return _expand_vector(local) if form == "laplacian_vector" else local
    if form == "mass":
        local = np.einsum("cq,qa,qb->cab", dx, vr, vc)
        return _expand_vector(local) if got == (2, 2) else local
    if form == "grad_p_dot_v":
        # row 2a+k: test function psi_a e_k against d_k p_b
        local = np.einsum("cq,qa,cqbk->cakb", dx, vr, gc)
        T, na, _, nb = local.shape
        return local.reshape(T, 2 * na, nb)
    # div_u_times_q: column 2b+l is trial psi_b e_l, contributes d_l psi_b
    local = np.einsum("cq,qa,cqbl->cabl", dx, vr, gc)
    T, na, nb, _ = local.shape
    return local.reshape(T, na, 2 * nb)


def assemble_matrix(mesh, row_space: DofMap, col_space: DofMap, form: str,
                    degree: int = DEFAULT_DEGREE) -> sp.csr_matrix:
    local = element_matrices(mesh, row_space, col_space, form, degree)
    rdofs = row_space.cell_dofs
    cdofs = col_space.cell_dofs
    rows = np.broadcast_to(rdofs[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(cdofs[:, None, :], local.shape).ravel()
    A = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(row_space.n_dofs, col_space.n_dofs)
    ).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _require_scalar(space: DofMap, what: str):
    if space.ncomp != 1:
        raise ValueError(f"{what} needs a scalar space")


def body_force_load(mesh, space: DofMap, F, degree: int = DEFAULT_DEGREE) -> np.ndarray:
    """Entries ``int F . phi_i`` over a vector space."""
    if space.ncomp != 2:
        raise ValueError("body_force load needs the vector velocity space")
    rule = quadrature_rule("triangle", degree)
    J, det, _, origin = affine_maps(mesh)
    xq = origin[:, None, :] + np.einsum("cij,qj->cqi", J, rule.points)
    Fq = evaluate_function(F, xq, ncomp=2)
    vals, _ = basis_tables(space.family, rule.points)
    local = np.einsum("c,q,qa,cqk->cak", det, rule.weights, vals, Fq).reshape(len(det), -1)
    return np.bincount(space.cell_dofs.ravel(), local.ravel(), minlength=space.n_dofs)


def volume_load(mesh, space: DofMap, f, degree: int = DEFAULT_DEGREE) -> np.ndarray:
    """Entries ``int f psi_i`` over a scalar space."""
    _require_scalar(space, "volume load")
    rule = quadrature_rule("triangle", degree)
    J, det, _, origin = affine_maps(mesh)
    xq = origin[:, None, :] + np.einsum("cij,qj->cqi", J, rule.points)
    fq = evaluate_function(f, xq)
    vals, _ = basis_tables(space.family, rule.points)
    local = np.einsum("c,q,qa,cq->ca", det, rule.weights, vals, fq)
    return np.bincount(space.cell_nodes.ravel(), local.ravel(), minlength=space.n_dofs)


def _edge_trace_basis(family: str, t: np.ndarray) -> np.ndarray:
    if family == "P1":
        return np.column_stack([1 - t, t])
    return np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)])


def boundary_load(mesh, space: DofMap, g, sides, degree: int = EDGE_DEGREE) -> np.ndarray:
    """Entries ``int_{sides} g psi_i ds`` with ``g(x, y, nx, ny)``."""
    _require_scalar(space, "boundary load")
    out = np.zeros(space.n_dofs)
    mask = np.isin(mesh.boundary_sides, list(sides))
    edges = mesh.boundary_edges[mask]
    if len(edges) == 0:
        return out
    normals = mesh.boundary_normals[mask]
    rule = quadrature_rule("edge", degree)
    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    length = np.hypot(*(b - a).T)
    xq = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
    nx = np.broadcast_to(normals[:, None, 0], xq.shape[:2])
    ny = np.broadcast_to(normals[:, None, 1], xq.shape[:2])
    gq = evaluate_function(lambda x, y: g(x, y, nx, ny), xq)
    phi = _edge_trace_basis(space.family, rule.points)
    local = np.einsum("e,q,qa,eq->ea", length, rule.weights, phi, gq)
    nodes = [mesh.edges[edges, 0], mesh.edges[edges, 1]]
    if space.family == "P2":
        nodes.append(mesh.n_vertices + edges)
    nodes = np.column_stack(nodes)
    return out + np.bincount(nodes.ravel(), local.ravel(), minlength=space.n_dofs)


def assemble_load(mesh, space: DofMap, kind: str, *, F=None, div_F=None, g_b=None,
                  sides=None) -> np.ndarray:
    """Dispatch to the body-force, divergence-volume or Neumann-boundary functional.

    ``div_F_volume`` returns ``int (div F) psi_i``; the pressure functional is
    ``boundary_load - volume_load``.
    """
    if kind == "body_force":
        if F is None:
            raise ValueError("body_force load needs F")
        return body_force_load(mesh, space, F)
    if kind == "div_F_volume":
        if div_F is None:
            raise ValueError("div F must be supplied explicitly for the pressure functional")
        return volume_load(mesh, space, div_F)
    if kind == "neumann_boundary":
        if g_b is None:
            raise ValueError("neumann_boundary load needs g_b")
        return boundary_load(mesh, space, g_b, sides if sides is not None else mesh_sides(mesh))
    raise ValueError(f"unknown load kind {kind!r}; expected one of {LOAD_KINDS}")


def mesh_sides(mesh):
    return tuple(s for s in ("left", "right", "bottom", "top") if (mesh.boundary_sides == s).any())


def pressure_functional(mesh, space: DofMap, div_F, g_b, neumann_sides) -> np.ndarray:
    """``<G, psi_i> = int_{Gamma_N} g_b psi_i - int (div F) psi_i``."""
    G = -volume_load(mesh, space, div_F)
    if neumann_sides:
        G = G + boundary_load(mesh, space, g_b, neumann_sides)
    return G


@dataclass(eq=False)
class AssembledSystem:
    """Reduced square system on the free unknowns plus the imposed values.

    ``lifting`` has the full length with imposed values at fixed unknowns and
    zeros elsewhere; :meth:`expand` adds a free solution back onto it.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    lifting: np.ndarray

    @property
    def n_total(self) -> int:
        return len(self.lifting)

    def expand(self, x_free) -> np.ndarray:
        full = self.lifting.copy()
        full[self.free] = x_free
        return full


def apply_dirichlet(matrix, rhs, fixed, values) -> AssembledSystem:
    """Eliminate fixed unknowns by lifting.

    ``values`` is either full-length (read at ``fixed``) or aligned with ``fixed``.
    """
    matrix = sp.csr_matrix(matrix)
    n = matrix.shape[0]
    given = np.asarray(fixed, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    lifting = np.zeros(n)
    lifting[given] = values[given] if values.shape == (n,) else values
    fixed = np.unique(given)
    is_free = np.ones(n, dtype=bool)
    is_free[fixed] = False
    free = np.flatnonzero(is_free)
    A_ff = matrix[free][:, free].tocsr()
    b = np.asarray(rhs, dtype=float)[free] - matrix[free][:, fixed] @ lifting[fixed]
    return AssembledSystem(A_ff, b, free, fixed, lifting)


def write_matrix_market(path, matrix, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), comment=comment)
