"""Reference P1/P2 Lagrange bases, quadrature rules and affine cell maps.

The reference triangle has vertices (0, 0), (1, 0), (0, 1).  With barycentric
coordinates ``l0 = 1 - xi - eta``, ``l1 = xi``, ``l2 = eta`` the P2 basis is
ordered as the three vertex functions ``li (2 li - 1)`` followed by the edge
functions ``4 l0 l1``, ``4 l1 l2``, ``4 l2 l0`` (local edge ``k`` joins
vertices ``k`` and ``k + 1``, matching ``Mesh.cell_edges``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

FAMILIES = ("P1", "P2")

P1_NODES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
P2_NODES = np.array(
    [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]
)


@dataclass(frozen=True)
class BasisEval:
    values: np.ndarray
    gradients: np.ndarray


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int
    domain: str


@dataclass(frozen=True)
class AffineMap:
    jacobian: np.ndarray
    determinant: float
    inverse_transpose: np.ndarray
    translation: np.ndarray

    def __call__(self, ref_points):
        ref_points = np.asarray(ref_points, dtype=float)
        return ref_points @ self.jacobian.T + self.translation


def n_basis(family: str) -> int:
    if family == "P1":
        return 3
    if family == "P2":
        return 6
    raise ValueError(f"unknown element family {family!r}")


def basis_tables(family: str, points) -> tuple[np.ndarray, np.ndarray]:
    """Values ``(nq, nb)`` and reference gradients ``(nq, nb, 2)`` at many points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xi, eta = pts[:, 0], pts[:, 1]
    l0 = 1.0 - xi - eta
    nq = len(pts)
    if family == "P1":
        values = np.column_stack([l0, xi, eta])
        grads = np.broadcast_to(
            np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (nq, 3, 2)
        ).copy()
        return values, grads
    if family == "P2":
        values = np.column_stack(
            [
                l0 * (2 * l0 - 1),
                xi * (2 * xi - 1),
                eta * (2 * eta - 1),
                4 * l0 * xi,
                4 * xi * eta,
                4 * eta * l0,
            ]
        )
        grads = np.empty((nq, 6, 2))
        grads[:, 0, 0] = grads[:, 0, 1] = 1 - 4 * l0
        grads[:, 1, 0], grads[:, 1, 1] = 4 * xi - 1, 0.0
        grads[:, 2, 0], grads[:, 2, 1] = 0.0, 4 * eta - 1
        grads[:, 3, 0], grads[:, 3, 1] = 4 * (l0 - xi), -4 * xi
        grads[:, 4, 0], grads[:, 4, 1] = 4 * eta, 4 * xi
        grads[:, 5, 0], grads[:, 5, 1] = -4 * eta, 4 * (l0 - eta)
        return values, grads
    raise ValueError(f"unknown element family {family!r}")


def eval_basis(family: str, point) -> BasisEval:
    """Evaluate one family's basis at a single point of the closed reference triangle."""
    xi, eta = (float(c) for c in point)
    tol = 1e-14
    if xi < -tol or eta < -tol or xi + eta > 1 + tol:
        raise ValueError(f"point ({xi}, {eta}) lies outside the reference triangle")
    values, grads = basis_tables(family, [[xi, eta]])
    return BasisEval(values[0], grads[0])


def _orbit3(w, a):
    b = (1.0 - a) / 2.0
    return [(w, b, b), (w, a, b), (w, b, a)]


def _orbit6(w, a, b):
    c = 1.0 - a - b
    bary = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
    return [(w, l1, l2) for _, l1, l2 in bary]


# Symmetric rules (Strang-Fix / Dunavant), weights already scaled to area 1/2.
# Constants were re-solved from the moment equations to full double precision.
_TRIANGLE_RULES = {
    1: [(0.5, 1 / 3, 1 / 3)],
    2: [(1 / 6, 1 / 6, 1 / 6), (1 / 6, 2 / 3, 1 / 6), (1 / 6, 1 / 6, 2 / 3)],
    4: _orbit3(0.11169079483900573285, 0.10810301816807022736)
    + _orbit3(0.054975871827660933819, 0.81684757298045851308),
    5: [(0.1125, 1 / 3, 1 / 3)]
    + _orbit3(0.066197076394253090369, 0.059715871789769820459)
    + _orbit3(0.062969590272413576298, 0.7974269853530873224),
    6: _orbit3(0.058393137863189683013, 0.50142650965817915742)
    + _orbit3(0.02542245318510340846, 0.87382197101699554332)
    + _orbit6(0.041425537809186787597, 0.053145049844816947353, 0.31035245103378440542),
}
# degree 3 reuses the positive-weight 6-point rule
_TRIANGLE_RULES[3] = _TRIANGLE_RULES[4]


@lru_cache(maxsize=None)
def quadrature_rule(domain: str, degree: int) -> QuadratureRule:
    """Quadrature on the reference triangle or the unit edge [0, 1], exact up to ``degree``."""
    if not isinstance(degree, (int, np.integer)) or not 1 <= degree <= 6:
        raise ValueError(f"unsupported quadrature degree {degree!r}; expected 1..6")
    if domain == "triangle":
        rule = np.array(_TRIANGLE_RULES[int(degree)])
        points = rule[:, 1:].copy()
        weights = rule[:, 0].copy()
    elif domain == "edge":
        x, w = np.polynomial.legendre.leggauss(int(degree) // 2 + 1)
        points = 0.5 * (x + 1.0)
        weights = 0.5 * w
    else:
        raise ValueError(f"unknown quadrature domain {domain!r}")
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, int(degree), domain)


def affine_maps(mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Jacobians, determinants, inverse transposes and translations of every cell."""
    p = mesh.vertices[mesh.triangles]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv_t = np.empty_like(J)
    inv_t[:, 0, 0] = J[:, 1, 1] / det
    inv_t[:, 0, 1] = -J[:, 1, 0] / det
    inv_t[:, 1, 0] = -J[:, 0, 1] / det
    inv_t[:, 1, 1] = J[:, 0, 0] / det
    return J, det, inv_t, p[:, 0]


def geometry_map(mesh, cell: int) -> AffineMap:
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell {cell} out of range for {mesh.n_cells} cells")
    p = mesh.vertices[mesh.triangles[cell]]
    J = np.column_stack([p[1] - p[0], p[2] - p[0]])
    det = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    return AffineMap(J, det, np.linalg.inv(J).T, p[0].copy())


def physical_gradients(ref_grads: np.ndarray, inv_t: np.ndarray) -> np.ndarray:
    """Map reference gradients ``(nq, nb, 2)`` to physical ones ``(T, nq, nb, 2)``."""
    return np.einsum("cij,qbj->cqbi", inv_t, ref_grads)
