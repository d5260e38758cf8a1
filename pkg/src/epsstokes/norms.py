"""Error norms of finite-element fields and the discrete dual norm on Q."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dofs import Field, evaluate_function
from .elements import affine_maps, quadrature_rule
from .mesh import BoundaryPartition, Mesh

NORM_DEGREE = 6
DUAL_TOL = 1e-10


@dataclass(frozen=True)
class ErrorReport:
    l2: float
    h1_semi: float
    h1: float
    l2_mean_zero: float


def _eval_gradient(gradient, xq, ncomp):
    g = gradient(xq[..., 0], xq[..., 1])
    if ncomp == 1:
        gx, gy = g
        return np.stack([np.broadcast_to(gx, xq.shape[:-1]),
                         np.broadcast_to(gy, xq.shape[:-1])], axis=-1).astype(float)
    rows = [[np.broadcast_to(np.asarray(c, dtype=float), xq.shape[:-1]) for c in row] for row in g]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def _reference_on_cells(reference, gradient, mesh: Mesh, ref_points, xq, ncomp):
    if isinstance(reference, Field):
        if reference.ncomp != ncomp:
            raise ValueError("field and reference have different value dimensions")
        if reference.mesh is mesh:
            return reference.on_cells(ref_points)
        flat = xq.reshape(-1, 2)
        v, g = reference.evaluate(flat, with_gradient=True)
        return v.reshape(xq.shape[:-1] + v.shape[1:]), g.reshape(xq.shape[:-1] + g.shape[1:])
    if gradient is None:
        raise ValueError("an analytic reference needs its gradient for the H1 seminorm")
    values = evaluate_function(reference, xq, ncomp)
    return values, _eval_gradient(gradient, xq, ncomp)


def error_norm(field: Field, reference=None, mesh: Mesh | None = None, gradient=None,
               degree: int = NORM_DEGREE) -> ErrorReport:
    """Norms of ``field - reference``.

    ``reference`` is a :class:`Field` (any mesh, any space with matching value
    dimension), an analytic ``f(x, y)`` together with ``gradient(x, y)``, or
    None for the norms of ``field`` itself.  Vector gradients are returned as
    ``((du/dx, du/dy), (dv/dx, dv/dy))``.
    """
    mesh = mesh if mesh is not None else field.mesh
    rule = quadrature_rule("triangle", degree)
    J, det, _, origin = affine_maps(mesh)
    xq = origin[:, None, :] + np.einsum("cij,qj->cqi", J, rule.points)
    v, g = field.on_cells(rule.points)
    if reference is not None:
        rv, rg = _reference_on_cells(reference, gradient, mesh, rule.points, xq, field.ncomp)
        v = v - rv
        g = g - rg
    dx = det[:, None] * rule.weights[None, :]
    area = dx.sum()

    vv = v if field.ncomp == 2 else v[..., None]
    l2sq = float(np.einsum("cq,cqk->", dx, vv**2))
    semi_sq = float(np.sum(dx * (g**2).reshape(g.shape[0], g.shape[1], -1).sum(axis=2)))
    mean = np.einsum("cq,cqk->k", dx, vv) / area
    mz_sq = float(np.einsum("cq,cqk->", dx, (vv - mean) ** 2))
    return ErrorReport(
        l2=float(np.sqrt(l2sq)),
        h1_semi=float(np.sqrt(semi_sq)),
        h1=float(np.sqrt(l2sq + semi_sq)),
        l2_mean_zero=float(np.sqrt(mz_sq)),
    )


def dual_norm_Q(functional, partition: BoundaryPartition, mesh: Mesh) -> float:
    """``sup <f, psi> / ||grad psi||`` over the discrete P1 space Q.

    Realized through the Riesz representative ``w`` solving
    ``int grad w . grad psi = <f, psi>``; the value is ``sqrt(f . w)``.
    """
    from .systems import operators, solve_poisson

    f = np.asarray(functional, dtype=float)
    ops = operators(mesh, partition)
    if f.shape != (ops.np_,):
        raise ValueError(f"functional has shape {f.shape}, expected ({ops.np_},)")
    if partition.is_pure_neumann:
        defect = f.sum()
        if abs(defect) > DUAL_TOL * max(1.0, np.abs(f).sum()):
            raise ValueError(f"functional does not annihilate constants (defect {defect:.3e})")
    if not np.any(f):
        return 0.0
    f = f.copy()
    f[ops.Q.dirichlet_dofs] = 0.0
    w, _, _ = solve_poisson(ops, f)
    return float(np.sqrt(max(f @ w, 0.0)))
