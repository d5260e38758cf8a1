"""Eps sweeps, mesh-refinement studies and log-log slope fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dofs import subtract_mean
from .mesh import Mesh, build_structured
from .norms import ErrorReport, error_norm
from .systems import ProblemData, Solution, solve_es, solve_pp, solve_stokes

SWEEP_COLUMNS = ("err_u_l2", "err_u_h1semi", "err_p_l2", "err_p_h1semi")
FIT_COLUMNS = SWEEP_COLUMNS + ("err_u_h1", "err_p_h1")
FLOOR_FACTOR = 10.0
# relative round-off level of a direct solve, used as the floor when the
# discretization floor is smaller still
ROUNDOFF_REL = 1e-12


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    window: tuple
    n_points: int

    @property
    def degenerate(self) -> bool:
        return self.n_points < 2


def fit_slope(points, floor: float = 0.0) -> FitResult:
    """Least squares of ``log10(err)`` against ``log10(eps)``.

    Points with ``err < FLOOR_FACTOR * floor`` (or non-positive) are left out;
    fewer than two remaining points give a degenerate fit with NaN slope.
    """
    kept = [(float(e), float(r)) for e, r in points
            if r > 0 and math.isfinite(r) and r >= FLOOR_FACTOR * floor]
    kept.sort()
    if len(kept) < 2:
        return FitResult(math.nan, math.nan, (math.nan, math.nan), len(kept))
    lx = np.log10([e for e, _ in kept])
    ly = np.log10([r for _, r in kept])
    slope, intercept = np.polyfit(lx, ly, 1)
    return FitResult(float(slope), float(intercept), (kept[0][0], kept[-1][0]), len(kept))


def compare(sol: Solution, ref: Solution, align_mean: bool) -> dict:
    """Sweep error columns of ``sol`` against ``ref``."""
    eu = error_norm(sol.velocity, ref.velocity)
    p = subtract_mean(sol.pressure) if align_mean else sol.pressure
    q = subtract_mean(ref.pressure) if align_mean else ref.pressure
    ep = error_norm(p, q)
    return {
        "err_u_l2": eu.l2,
        "err_u_h1semi": eu.h1_semi,
        "err_p_l2": ep.l2,
        "err_p_h1semi": ep.h1_semi,
        "err_u_h1": eu.h1,
        "err_p_h1": ep.h1,
    }


def solution_scale(sol: Solution) -> float:
    """Combined H1 norm of velocity and pressure, the scale of round-off."""
    return math.hypot(error_norm(sol.velocity).h1, error_norm(sol.pressure).h1)


def solve_reference(mesh: Mesh, data: ProblemData, reference: str) -> Solution:
    if reference == "pp":
        return solve_pp(mesh, data)
    if reference == "stokes":
        return solve_stokes(mesh, data)
    raise ValueError(f"reference must be 'pp' or 'stokes', got {reference!r}")


def refined(mesh: Mesh) -> Mesh:
    if mesh.grid is None:
        raise ValueError("discretization floor needs a structured mesh")
    nx, ny = mesh.grid
    return build_structured(2 * nx, 2 * ny, mesh.rect)


@dataclass
class SweepResult:
    reference: str
    rows: list
    fits: dict
    floors: dict
    residuals: list = field(default_factory=list)

    def column(self, name: str) -> list:
        return [(r["eps"], r[name]) for r in self.rows]


def run_sweep(mesh: Mesh, data: ProblemData, eps_grid, reference: str = "pp") -> SweepResult:
    """Fresh eps-Stokes solve per grid value against one reference solution.

    For ``reference='stokes'`` pressures are compared modulo constants.  The
    floor of each column is the larger of the reference's own change under one
    2x refinement and ``ROUNDOFF_REL`` times the reference solution scale.
    """
    eps_grid = [float(e) for e in eps_grid]
    if any(e <= 0 for e in eps_grid) or any(b <= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps grid must be positive and strictly increasing")
    align = reference == "stokes"
    ref = solve_reference(mesh, data, reference)
    fine = solve_reference(refined(mesh), data, reference)
    disc = compare(ref, fine, align)
    noise = ROUNDOFF_REL * solution_scale(ref)
    floors = {c: max(disc[c], noise) for c in FIT_COLUMNS}

    rows, residuals = [], []
    for eps in eps_grid:
        sol = solve_es(mesh, data, eps)
        rows.append({"eps": eps, **compare(sol, ref, align)})
        residuals.append(sol.residual)
    fits = {c: fit_slope([(r["eps"], r[c]) for r in rows], floors[c]) for c in FIT_COLUMNS}
    return SweepResult(reference, rows, fits, floors, residuals)


def numeric_gradient(f, ncomp: int = 1, h: float = 1e-3):
    """Fourth-order central-difference gradient of a vectorized ``f(x, y)``."""

    def d(g, x, y, dx, dy):
        return (-g(x + 2 * dx, y + 2 * dy) + 8 * g(x + dx, y + dy)
                - 8 * g(x - dx, y - dy) + g(x - 2 * dx, y - 2 * dy)) / (12 * h)

    if ncomp == 1:
        return lambda x, y: (d(f, x, y, h, 0.0), d(f, x, y, 0.0, h))

    def grad(x, y):
        fx = lambda a, b: np.asarray(f(a, b)[0], dtype=float)
        fy = lambda a, b: np.asarray(f(a, b)[1], dtype=float)
        return ((d(fx, x, y, h, 0.0), d(fx, x, y, 0.0, h)),
                (d(fy, x, y, h, 0.0), d(fy, x, y, 0.0, h)))

    return grad


def solve_problem(mesh: Mesh, data: ProblemData, problem: str) -> Solution:
    if problem == "stokes":
        return solve_stokes(mesh, data)
    if problem == "pp":
        return solve_pp(mesh, data)
    if problem == "es":
        return solve_es(mesh, data)
    raise ValueError(f"problem must be stokes, pp or es, got {problem!r}")


def exact_errors(sol: Solution, exact_u, grad_u, exact_p, grad_p, mean_zero_pressure: bool) -> tuple[ErrorReport, ErrorReport]:
    eu = error_norm(sol.velocity, exact_u, gradient=grad_u or numeric_gradient(exact_u, 2))
    ep = error_norm(sol.pressure, exact_p, gradient=grad_p or numeric_gradient(exact_p))
    if mean_zero_pressure:
        ep = ErrorReport(ep.l2_mean_zero, ep.h1_semi,
                         math.sqrt(ep.l2_mean_zero**2 + ep.h1_semi**2), ep.l2_mean_zero)
    return eu, ep


@dataclass
class MMSResult:
    rows: list
    fits: dict


def run_mms(data: ProblemData, problem: str, exact_u, exact_p, ns, rect=(0.0, 0.0, 1.0, 1.0),
            grad_u=None, grad_p=None) -> MMSResult:
    """Errors against a manufactured solution on ``n x n`` meshes; orders fitted against h."""
    mean_zero = problem == "stokes" or data.partition.is_pure_neumann
    rows = []
    for n in ns:
        mesh = build_structured(n, n, rect)
        sol = solve_problem(mesh, data, problem)
        eu, ep = exact_errors(sol, exact_u, grad_u, exact_p, grad_p, mean_zero)
        rows.append({
            "n": n, "h": (rect[2] - rect[0]) / n,
            "err_u_l2": eu.l2, "err_u_h1semi": eu.h1_semi, "err_u_h1": eu.h1,
            "err_p_l2": ep.l2, "err_p_h1semi": ep.h1_semi, "err_p_h1": ep.h1,
        })
    fits = {c: fit_slope([(r["h"], r[c]) for r in rows]) for c in FIT_COLUMNS}
    return MMSResult(rows, fits)
