"""Discrete Stokes, pressure-Poisson and eps-Stokes problems on Taylor-Hood P2/P1.

Unknowns of the monolithic systems are laid out as
``[velocity (P2vec) | pressure (P1) | mean multiplier]``; the multiplier is
present only where the pressure lives in a space modulo constants.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    AssembledSystem,
    apply_dirichlet,
    assemble_matrix,
    body_force_load,
    boundary_load,
    pressure_functional,
    volume_load,
)
from .dofs import DofMap, Field, build_dofmap, evaluate_function
from .mesh import SIDES, BoundaryPartition, Mesh

log = logging.getLogger(__name__)

REGIMES = ("neumann", "mixed", "dirichlet")
RESIDUAL_TOL = 1e-10
COMPAT_TOL = 1e-10
PIVOT_TOL = 1e-13


class SingularSystemError(RuntimeError):
    pass


class DataError(ValueError):
    """Problem data violating a solvability condition."""


def _zero(x, y):
    return np.zeros_like(x)


def _zero_vec(x, y):
    return np.zeros_like(x), np.zeros_like(x)


def _zero_flux(x, y, nx, ny):
    return np.zeros_like(x)


def normal_flux(vx, vy) -> Callable:
    """Boundary flux ``g(x, y, nx, ny) = (vx, vy) . nu``."""
    return lambda x, y, nx, ny: vx(x, y) * nx + vy(x, y) * ny


def scalar_flux(g) -> Callable:
    return lambda x, y, nx, ny: g(x, y)


@dataclass
class ProblemData:
    """Data of one problem; callables are vectorized over numpy arrays.

    ``F``/``u_b`` return pairs, ``div_F``/``p_b`` scalars and ``g_b`` takes the
    outward normal as well: ``g_b(x, y, nx, ny)``.
    """

    F: Callable = _zero_vec
    div_F: Callable | None = _zero
    u_b: Callable = _zero_vec
    g_b: Callable = _zero_flux
    p_b: Callable = _zero
    pressure_bc: str = "neumann"
    partition: BoundaryPartition | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.pressure_bc not in REGIMES:
            raise ValueError(f"pressure_bc must be one of {REGIMES}, got {self.pressure_bc!r}")
        if self.pressure_bc == "neumann":
            self.partition = BoundaryPartition.neumann()
        elif self.pressure_bc == "dirichlet":
            self.partition = BoundaryPartition.dirichlet()
        elif self.partition is None or self.partition.is_pure_neumann or not self.partition.neumann_sides:
            raise ValueError("mixed pressure conditions need a partition with both parts nonempty")
        if self.eps is not None:
            self.eps = float(self.eps)
            if not self.eps > 0:
                raise ValueError(f"eps must be positive, got {self.eps}")

    def with_eps(self, eps: float) -> "ProblemData":
        return ProblemData(self.F, self.div_F, self.u_b, self.g_b, self.p_b,
                           self.pressure_bc, self.partition, eps)


@dataclass(eq=False)
class Solution:
    velocity: Field
    pressure: Field
    residual_norm: float
    multiplier: float | None = None
    residual: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class Operators:
    """Eps-independent blocks shared by every solve on one mesh and partition."""

    mesh: Mesh
    V: DofMap
    Q: DofMap
    A: sp.csr_matrix  # int grad u : grad phi
    L: sp.csr_matrix  # int grad p . grad psi
    C: sp.csr_matrix  # int grad p . phi
    B: sp.csr_matrix  # int (div u) psi
    mass_row: np.ndarray  # int psi_j

    @property
    def nu(self) -> int:
        return self.V.n_dofs

    @property
    def np_(self) -> int:
        return self.Q.n_dofs


@lru_cache(maxsize=8)
def operators(mesh: Mesh, partition: BoundaryPartition) -> Operators:
    V = build_dofmap(mesh, "P2vec")
    Q = build_dofmap(mesh, "P1", partition)
    return Operators(
        mesh, V, Q,
        A=assemble_matrix(mesh, V, V, "laplacian_vector"),
        L=assemble_matrix(mesh, Q, Q, "laplacian_scalar"),
        C=assemble_matrix(mesh, V, Q, "grad_p_dot_v"),
        B=assemble_matrix(mesh, Q, V, "div_u_times_q"),
        mass_row=volume_load(mesh, Q, lambda x, y: np.ones_like(x)),
    )


def solve_sparse(system) -> np.ndarray:
    """Direct sparse LU (SuperLU, partial pivoting) with one refinement step.

    Accepts an :class:`AssembledSystem` or a ``(matrix, rhs)`` pair and
    returns the free-unknown solution.
    """
    if isinstance(system, AssembledSystem):
        A, b = system.matrix, system.rhs
    else:
        A, b = system
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != len(b):
        raise ValueError(f"need a square system, got matrix {A.shape} and rhs {b.shape}")
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularSystemError(f"LU factorization failed: {exc}") from exc
    pivots = np.abs(lu.U.diagonal())
    k = int(np.argmin(pivots))
    if pivots[k] <= PIVOT_TOL * pivots.max():
        row = int(np.flatnonzero(lu.perm_r == k)[0])
        raise SingularSystemError(
            f"singular to working precision: pivot {k} (original row {row}) "
            f"has magnitude {pivots[k]:.3e} vs max {pivots.max():.3e}"
        )
    x = lu.solve(b)
    x += lu.solve(b - A @ x)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    rel = np.linalg.norm(r) / bnorm if bnorm > 0 else np.linalg.norm(r)
    if rel > RESIDUAL_TOL:
        raise SingularSystemError(f"relative residual {rel:.3e} exceeds {RESIDUAL_TOL:g}")
    return x


def _residual(system: AssembledSystem, x):
    r = system.rhs - system.matrix @ x
    bnorm = np.linalg.norm(system.rhs)
    return r, (np.linalg.norm(r) / bnorm if bnorm > 0 else np.linalg.norm(r))


def velocity_boundary_values(ops: Operators, u_b) -> tuple[np.ndarray, np.ndarray]:
    """Boundary velocity dofs and the full-length vector of imposed values."""
    nodes = ops.V.boundary_nodes()
    vals = evaluate_function(u_b, ops.V.node_coords[nodes], ncomp=2)
    full = np.zeros(ops.nu)
    full[2 * nodes] = vals[:, 0]
    full[2 * nodes + 1] = vals[:, 1]
    return ops.V.nodes_to_dofs(nodes), full


def boundary_outflow(ops: Operators, u_b) -> tuple[float, float]:
    """``int_Gamma I_h(u_b) . nu`` and ``int_Gamma |I_h(u_b) . nu|`` on the P2 trace."""
    P2 = build_dofmap(ops.mesh, "P2")
    wx = boundary_load(ops.mesh, P2, lambda x, y, nx, ny: nx, SIDES)
    wy = boundary_load(ops.mesh, P2, lambda x, y, nx, ny: ny, SIDES)
    _, full = velocity_boundary_values(ops, u_b)
    ux, uy = full[0::2], full[1::2]
    return float(wx @ ux + wy @ uy), float(np.abs(wx) @ np.abs(ux) + np.abs(wy) @ np.abs(uy))


def check_velocity_data(ops: Operators, data: ProblemData) -> None:
    flux, scale = boundary_outflow(ops, data.u_b)
    if abs(flux) > COMPAT_TOL * max(1.0, scale):
        raise DataError(f"boundary velocity has net outflow {flux:.3e}; need int u_b . nu = 0")


def pressure_load(ops: Operators, data: ProblemData) -> np.ndarray:
    part = data.partition
    if data.div_F is None:
        raise DataError("div F must be supplied for the pressure-Poisson functional")
    G = pressure_functional(ops.mesh, ops.Q, data.div_F, data.g_b, tuple(sorted(part.neumann_sides)))
    if part.is_pure_neumann:
        defect = G.sum()
        scale = max(1.0, np.abs(G).sum())
        if abs(defect) > COMPAT_TOL * scale:
            raise DataError(
                f"Neumann compatibility violated: int g_b - int div F = {defect:.3e}"
            )
    return G


def pressure_boundary_values(ops: Operators, data: ProblemData) -> tuple[np.ndarray, np.ndarray]:
    dofs = ops.Q.dirichlet_dofs
    full = np.zeros(ops.np_)
    if len(dofs):
        full[dofs] = evaluate_function(data.p_b, ops.Q.node_coords[dofs])
    return dofs, full


def _mean_constraint(ops: Operators):
    m = sp.csr_matrix(ops.mass_row[:, None])
    return m


# -- Stokes ------------------------------------------------------------------

def stokes_system(mesh: Mesh, data: ProblemData):
    ops = operators(mesh, BoundaryPartition.neumann())
    check_velocity_data(ops, data)
    nu, npr = ops.nu, ops.np_
    m = _mean_constraint(ops)
    # <grad p, phi> := -int p div phi
    K = sp.bmat([
        [ops.A, -ops.B.T, None],
        [ops.B, None, m],
        [None, m.T, None],
    ], format="csr")
    rhs = np.concatenate([body_force_load(mesh, ops.V, data.F), np.zeros(npr + 1)])
    fixed, ub = velocity_boundary_values(ops, data.u_b)
    values = np.concatenate([ub, np.zeros(npr + 1)])
    return ops, apply_dirichlet(K, rhs, fixed, values)


def solve_stokes(mesh: Mesh, data: ProblemData) -> Solution:
    ops, system = stokes_system(mesh, data)
    x = solve_sparse(system)
    r, rel = _residual(system, x)
    full = system.expand(x)
    nu, npr = ops.nu, ops.np_
    return Solution(Field(ops.V, full[:nu]), Field(ops.Q, full[nu:nu + npr]), rel,
                    multiplier=float(full[-1]), residual=r)


# -- pressure-Poisson ----------------------------------------------------------

def solve_poisson(ops: Operators, load: np.ndarray, boundary_values: np.ndarray | None = None):
    """Solve ``int grad p . grad psi = load(psi)`` for all psi in Q.

    Returns ``(coefficients, multiplier, relative residual)``; the pure
    Neumann space is realized with a mean-zero multiplier.
    """
    npr = ops.np_
    if ops.Q.partition.is_pure_neumann:
        m = _mean_constraint(ops)
        K = sp.bmat([[ops.L, m], [m.T, None]], format="csr")
        system = apply_dirichlet(K, np.concatenate([load, [0.0]]), [], np.zeros(npr + 1))
        x = solve_sparse(system)
        _, rel = _residual(system, x)
        return x[:npr], float(x[npr]), rel
    fixed = ops.Q.dirichlet_dofs
    values = boundary_values if boundary_values is not None else np.zeros(npr)
    system = apply_dirichlet(ops.L, load, fixed, values)
    x = solve_sparse(system)
    _, rel = _residual(system, x)
    return system.expand(x), None, rel


def solve_vector_laplace(ops: Operators, load: np.ndarray, boundary_values: np.ndarray):
    """Velocity step: ``int grad u : grad phi = load(phi)`` with Dirichlet data."""
    fixed = ops.V.boundary_dofs()
    system = apply_dirichlet(ops.A, load, fixed, boundary_values)
    x = solve_sparse(system)
    _, rel = _residual(system, x)
    return system.expand(x), rel


def solve_pp(mesh: Mesh, data: ProblemData) -> Solution:
    ops = operators(mesh, data.partition)
    check_velocity_data(ops, data)
    G = pressure_load(ops, data)
    _, pb = pressure_boundary_values(ops, data)
    p, mult, rel_p = solve_poisson(ops, G, pb)
    _, ub = velocity_boundary_values(ops, data.u_b)
    load = body_force_load(mesh, ops.V, data.F) - ops.C @ p
    u, rel_u = solve_vector_laplace(ops, load, ub)
    return Solution(Field(ops.V, u), Field(ops.Q, p), max(rel_p, rel_u), multiplier=mult)


# -- eps-Stokes ----------------------------------------------------------------

@dataclass(frozen=True)
class Layout:
    nu: int
    np_: int
    n_mult: int

    def split(self, full):
        return full[:self.nu], full[self.nu:self.nu + self.np_], full[self.nu + self.np_:]


def es_matrix(ops: Operators, eps: float) -> sp.csr_matrix:
    """Full monolithic matrix ``[[A, C, 0], [B, eps L, m], [0, m^T, 0]]``."""
    if ops.Q.partition.is_pure_neumann:
        m = _mean_constraint(ops)
        return sp.bmat([
            [ops.A, ops.C, None],
            [ops.B, eps * ops.L, m],
            [None, m.T, None],
        ], format="csr")
    return sp.bmat([[ops.A, ops.C], [ops.B, eps * ops.L]], format="csr")


def es_system(mesh: Mesh, data: ProblemData, eps: float | None = None):
    """Assemble the BC-reduced eps-Stokes system.

    Returns ``(ops, system, layout)`` where ``system.free`` indexes the full
    unknown vector described by ``layout``.
    """
    eps = data.eps if eps is None else float(eps)
    if eps is None or not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    ops = operators(mesh, data.partition)
    check_velocity_data(ops, data)
    n_mult = 1 if data.partition.is_pure_neumann else 0
    layout = Layout(ops.nu, ops.np_, n_mult)
    K = es_matrix(ops, eps)
    G = pressure_load(ops, data)
    rhs = np.concatenate([body_force_load(mesh, ops.V, data.F), eps * G, np.zeros(n_mult)])
    ufix, ub = velocity_boundary_values(ops, data.u_b)
    pfix, pb = pressure_boundary_values(ops, data)
    fixed = np.concatenate([ufix, ops.nu + pfix])
    values = np.concatenate([ub, pb, np.zeros(n_mult)])
    return ops, apply_dirichlet(K, rhs, fixed, values), layout


def solve_es(mesh: Mesh, data: ProblemData, eps: float | None = None) -> Solution:
    ops, system, layout = es_system(mesh, data, eps)
    x = solve_sparse(system)
    r, rel = _residual(system, x)
    u, p, mult = layout.split(system.expand(x))
    return Solution(Field(ops.V, u), Field(ops.Q, p), rel,
                    multiplier=float(mult[0]) if len(mult) else None, residual=r)
