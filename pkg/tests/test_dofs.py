import numpy as np
import pytest

from epsstokes.dofs import Field, build_dofmap, interpolate, mean_value, subtract_mean
from epsstokes.mesh import BoundaryPartition, build_structured


@pytest.mark.parametrize("kind, n", [("P1", 9), ("P2", 25), ("P2vec", 50)])
def test_counts(kind, n):
    assert build_dofmap(build_structured(2, 2), kind).n_dofs == n


@pytest.mark.parametrize("kind", ["P1", "P2", "P2vec"])
def test_every_dof_referenced(kind):
    d = build_dofmap(build_structured(3, 2), kind)
    assert np.array_equal(np.unique(d.cell_dofs), np.arange(d.n_dofs))


def test_shared_nodes_consistent():
    m = build_structured(3, 3)
    d = build_dofmap(m, "P2")
    coords = d.node_coords[d.cell_nodes]
    from epsstokes.elements import P2_NODES, affine_maps
    J, _, _, origin = affine_maps(m)
    expected = origin[:, None, :] + np.einsum("cij,qj->cqi", J, P2_NODES)
    np.testing.assert_allclose(coords, expected, atol=1e-15)


@pytest.mark.parametrize("ny", [1, 2, 5])
def test_dirichlet_count_left(ny):
    m = build_structured(3, ny)
    part = BoundaryPartition.mixed({"left"})
    assert len(build_dofmap(m, "P1", part).dirichlet_dofs) == ny + 1
    assert len(build_dofmap(m, "P2", part).dirichlet_dofs) == 2 * ny + 1


def test_corner_nodes_are_dirichlet():
    m = build_structured(2, 2)
    d = build_dofmap(m, "P1", BoundaryPartition.mixed({"left"}))
    xy = d.node_coords[d.dirichlet_dofs]
    assert {(0.0, 0.0), (0.0, 1.0)} <= {tuple(p) for p in xy}


def test_interpolation_examples():
    m = build_structured(4, 4)
    p = interpolate(build_dofmap(m, "P1"), lambda x, y: 2 * x + 2 * y - 2)
    assert abs(p.evaluate([[0.5, 0.5]])[0]) < 1e-15
    q = interpolate(build_dofmap(m, "P2"), lambda x, y: x * (x - 1))
    assert q.evaluate([[0.3, 0.7]])[0] == pytest.approx(-0.21, abs=1e-15)
    l = interpolate(build_dofmap(m, "P1"), lambda x, y: x * (x - 1))
    # midpoint of the bottom edge from (0,0) to (0.25,0): linear average of 0 and -0.1875
    assert l.evaluate([[0.125, 0.0]])[0] == pytest.approx(-0.09375, abs=1e-15)
    assert 0.125 * (0.125 - 1) - (-0.09375) == pytest.approx(-0.25**2 / 4)


@pytest.mark.parametrize("kind, f", [
    ("P1", lambda x, y: 1.5 - x + 4 * y),
    ("P2", lambda x, y: x * x - 3 * x * y + y * y - 2 * y + 1),
])
def test_reproduces_polynomials(kind, f, rng):
    m = build_structured(5, 3, (0.0, 0.0, 2.0, 1.0))
    u = interpolate(build_dofmap(m, kind), f)
    pts = rng.random((50, 2)) * [2.0, 1.0]
    assert np.max(np.abs(u.evaluate(pts) - f(pts[:, 0], pts[:, 1]))) <= 1e-13


def test_vector_interpolation():
    m = build_structured(3, 3)
    u = interpolate(build_dofmap(m, "P2vec"), lambda x, y: (x * y, x - y * y))
    pts = np.array([[0.21, 0.77], [0.9, 0.05]])
    np.testing.assert_allclose(u.evaluate(pts), np.column_stack([pts[:, 0] * pts[:, 1], pts[:, 0] - pts[:, 1] ** 2]), atol=1e-14)


def test_lagrange_duality():
    m = build_structured(3, 2)
    d = build_dofmap(m, "P2")
    c = np.random.default_rng(1).standard_normal(d.n_dofs)
    f = Field(d, c)
    np.testing.assert_allclose(f.evaluate(d.node_coords), c, atol=1e-13)


def test_interpolation_failure_names_location():
    d = build_dofmap(build_structured(2, 2), "P1")
    with pytest.raises(Exception, match=r"0\.5"):
        interpolate(d, lambda x, y: 1.0 / (x - 0.5))


def test_mean_examples():
    m = build_structured(4, 4)
    d = build_dofmap(m, "P1")
    assert mean_value(interpolate(d, lambda x, y: 3 + 0 * x)) == pytest.approx(3.0, abs=1e-14)
    assert abs(mean_value(interpolate(d, lambda x, y: 2 * x + 2 * y - 2))) < 1e-15
    fx = interpolate(d, lambda x, y: x)
    assert mean_value(fx) == pytest.approx(0.5, abs=1e-15)
    shifted = subtract_mean(fx)
    np.testing.assert_allclose(shifted.coefficients, interpolate(d, lambda x, y: x - 0.5).coefficients, atol=1e-15)
    zero = subtract_mean(interpolate(d, lambda x, y: 3 + 0 * x))
    assert np.max(np.abs(zero.coefficients)) < 1e-14


def test_subtract_mean_properties(rng):
    d = build_dofmap(build_structured(4, 3), "P2")
    f = Field(d, rng.standard_normal(d.n_dofs))
    g = subtract_mean(f)
    assert abs(mean_value(g)) <= 1e-13
    np.testing.assert_allclose(subtract_mean(g).coefficients, g.coefficients, atol=1e-14)
    plus = Field(d, f.coefficients + 7.0)
    np.testing.assert_allclose(subtract_mean(plus).coefficients, g.coefficients, atol=1e-13)


def test_mean_rejects_vector():
    d = build_dofmap(build_structured(2, 2), "P2vec")
    with pytest.raises(ValueError):
        mean_value(Field(d, np.zeros(d.n_dofs)))


def test_field_length_checked():
    d = build_dofmap(build_structured(2, 2), "P1")
    with pytest.raises(ValueError):
        Field(d, np.zeros(d.n_dofs + 1))
