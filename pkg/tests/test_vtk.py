import numpy as np

from epsstokes.dofs import build_dofmap, interpolate
from epsstokes.mesh import build_structured
from epsstokes.vtk import refined_triangles, write_fields, write_mesh


def _section(lines, key):
    i = next(k for k, l in enumerate(lines) if l.startswith(key))
    return i, int(lines[i].split()[1])


def test_mesh_file(tmp_path):
    m = build_structured(2, 3)
    write_mesh(tmp_path / "m.vtk", m)
    lines = (tmp_path / "m.vtk").read_text().splitlines()
    assert lines[:4] == ["# vtk DataFile Version 2.0", "mesh", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    i, n = _section(lines, "POINTS")
    assert n == m.n_vertices
    j, c = _section(lines, "CELLS")
    assert c == m.n_cells and lines[j].split()[2] == str(4 * m.n_cells)
    k, _ = _section(lines, "CELL_TYPES")
    assert lines[k + 1:k + 1 + c] == ["5"] * c


def test_refined_triangles_positive_and_cover():
    m = build_structured(3, 2)
    pts = build_dofmap(m, "P2").node_coords
    t = refined_triangles(m)
    p = pts[t]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    assert np.all(area > 0)
    assert abs(area.sum() - 1.0) < 1e-14


def test_field_values_at_nodes(tmp_path):
    m = build_structured(2, 2)
    V, Q = build_dofmap(m, "P2vec"), build_dofmap(m, "P1")
    u = interpolate(V, lambda x, y: (x * x, y))
    p = interpolate(Q, lambda x, y: x + y)
    write_fields(tmp_path / "s.vtk", m, {"velocity": u, "pressure": p})
    lines = (tmp_path / "s.vtk").read_text().splitlines()
    i, n = _section(lines, "POINTS")
    xy = np.array([[float(v) for v in l.split()[:2]] for l in lines[i + 1:i + 1 + n]])
    k = lines.index("VECTORS velocity double")
    vel = np.array([[float(v) for v in l.split()] for l in lines[k + 1:k + 1 + n]])
    np.testing.assert_allclose(vel[:, 0], xy[:, 0] ** 2, atol=1e-15)
    np.testing.assert_allclose(vel[:, 2], 0.0)
    k = lines.index("SCALARS pressure double 1")
    pr = np.array([float(l) for l in lines[k + 2:k + 2 + n]])
    np.testing.assert_allclose(pr, xy.sum(axis=1), atol=1e-15)
