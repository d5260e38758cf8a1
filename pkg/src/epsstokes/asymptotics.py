"""Regular-perturbation expansion of the eps-Stokes solution in powers of 1/eps.

With ``v0 = u_PP`` the correction pairs solve, for ``i = 1..k``::

    int grad q_i . grad psi            = -int (div v_{i-1}) psi   for psi in Q
    int grad v_i : grad phi + int grad q_i . phi = 0              for phi in H^1_0

and ``u_eps ~ u_PP + v_1 / eps + ... + v_k / eps**k`` (same for the pressure).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import ROUNDOFF_REL, fit_slope, solution_scale
from .dofs import Field, mean_value
from .mesh import Mesh
from .norms import error_norm
from .systems import ProblemData, Solution, operators, solve_es, solve_poisson, solve_pp, solve_vector_laplace

MAX_ORDER = 3
COMPAT_DEFECT = 1e-9


@dataclass(frozen=True, eq=False)
class ExpansionTerm:
    order: int
    velocity: Field
    pressure: Field


class Expansion:
    """Correction terms for one mesh and data set, computed once."""

    def __init__(self, mesh: Mesh, data: ProblemData, k: int, pp: Solution | None = None):
        if not 0 <= k <= MAX_ORDER:
            raise ValueError(f"expansion order must lie in 0..{MAX_ORDER}, got {k}")
        self.mesh = mesh
        self.data = data
        self.k = k
        self.pp = pp if pp is not None else solve_pp(mesh, data)
        self.terms = expansion_terms(mesh, data, k, self.pp) if k else []

    def partial_sum(self, eps: float, order: int | None = None) -> tuple[Field, Field]:
        order = self.k if order is None else order
        u = self.pp.velocity.coefficients.copy()
        p = self.pp.pressure.coefficients.copy()
        for term in self.terms[:order]:
            scale = eps ** (-term.order)
            u += scale * term.velocity.coefficients
            p += scale * term.pressure.coefficients
        return self.pp.velocity.copy_with(u), self.pp.pressure.copy_with(p)

    def remainder(self, es: Solution, eps: float, order: int | None = None) -> tuple[float, float]:
        u, p = self.partial_sum(eps, order)
        return error_norm(es.velocity, u).h1, error_norm(es.pressure, p).h1


def expansion_terms(mesh: Mesh, data: ProblemData, k: int, pp: Solution | None = None) -> list[ExpansionTerm]:
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"expansion order must lie in 1..{MAX_ORDER}, got {k}")
    pp = pp if pp is not None else solve_pp(mesh, data)
    ops = operators(mesh, data.partition)
    zero_u = np.zeros(ops.nu)
    neumann = data.partition.is_pure_neumann
    previous = pp.velocity.coefficients
    terms = []
    for i in range(1, k + 1):
        load = -(ops.B @ previous)
        if neumann:
            defect = load.sum()
            if abs(defect) > COMPAT_DEFECT * max(1.0, np.abs(load).sum()):
                raise RuntimeError(
                    f"order {i}: divergence functional fails to annihilate constants "
                    f"(defect {defect:.3e}); upstream velocity has a net boundary flux"
                )
        q, _, _ = solve_poisson(ops, load)
        v, _ = solve_vector_laplace(ops, -(ops.C @ q), zero_u)
        terms.append(ExpansionTerm(i, Field(ops.V, v), Field(ops.Q, q)))
        previous = v
    return terms


def telescoped_remainder(expansion: Expansion, es: Solution, eps: float, k: int) -> Field:
    """``eps**k (u_eps - sum_{i<=k} eps**-i v_i)`` through ``w_{i+1} = eps (w_i - v_i)``."""
    w = eps * (es.velocity.coefficients - expansion.pp.velocity.coefficients)
    for term in expansion.terms[: k - 1]:
        w = eps * (w - term.velocity.coefficients)
    return es.velocity.copy_with(w - expansion.terms[k - 1].velocity.coefficients)


def direct_scaled_remainder(expansion: Expansion, es: Solution, eps: float, k: int) -> Field:
    u, _ = expansion.partial_sum(eps, k)
    return es.velocity.copy_with(eps**k * (es.velocity.coefficients - u.coefficients))


@dataclass(frozen=True)
class RemainderRow:
    eps: float
    rem_u_h1: float
    rem_p_h1: float
    k: int
    residual_norm: float


def remainder_curve(mesh: Mesh, data: ProblemData, k: int, eps_grid,
                    expansion: Expansion | None = None) -> list[RemainderRow]:
    """One fresh eps-Stokes solve per grid value, compared with the order-k partial sum."""
    eps_grid = [float(e) for e in eps_grid]
    if any(e <= 0 for e in eps_grid):
        raise ValueError("eps grid must be strictly positive")
    if any(b <= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps grid must be sorted strictly ascending")
    if expansion is None or expansion.k < k:
        expansion = Expansion(mesh, data, k)
    rows = []
    for eps in eps_grid:
        try:
            es = solve_es(mesh, data, eps)
        except Exception as exc:
            raise RuntimeError(f"eps-Stokes solve failed at eps={eps:g}: {exc}") from exc
        ru, rp = expansion.remainder(es, eps, k)
        rows.append(RemainderRow(eps, ru, rp, k, es.residual_norm))
    return rows


def pressure_means(terms: list[ExpansionTerm]) -> list[float]:
    return [mean_value(t.pressure) for t in terms]


def remainder_fits(rows: list[RemainderRow], pp: Solution) -> dict:
    """Log-log slopes of the remainder columns above the round-off floor.

    The floor is the PP solution scale times the larger of ``ROUNDOFF_REL``
    and the worst relative solver residual of the rows.
    """
    rel = max([ROUNDOFF_REL] + [r.residual_norm for r in rows])
    floor = rel * solution_scale(pp)
    return {c: fit_slope([(r.eps, getattr(r, c)) for r in rows], floor)
            for c in ("rem_u_h1", "rem_p_h1")}
