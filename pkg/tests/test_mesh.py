"""Mesh construction and P1 grid-function behavior."""

import numpy as np
import pytest

from nodal_lab.errors import MeshQualityError
from nodal_lab.mesh import GridFunction, Mesh2D, disc_mesh, half_disc_mesh


def test_disc_mesh_structure():
    mesh = disc_mesh(3)
    # vertex 0 is the center; h is the longest edge, same order as pi*R/(3*2^level)
    assert np.allclose(mesh.vertices[0], [0.0, 0.0])
    assert 0.08 < mesh.h < 0.25
    assert mesh.radius == 1.0
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    assert r.max() <= 1.0 + 1e-12
    outer = mesh.markers["outer"]
    assert np.allclose(r[outer], 1.0, atol=1e-12)
    mesh.validate()


def test_disc_mesh_halving():
    # one refinement level roughly halves the longest edge
    h4 = disc_mesh(4).h
    h5 = disc_mesh(5).h
    assert 1.9 < h4 / h5 < 2.05


def test_disc_mesh_scaled_center():
    mesh = disc_mesh(3, radius=0.5, center=(0.2, -0.1))
    assert np.allclose(mesh.vertices[0], [0.2, -0.1])
    r = np.hypot(mesh.vertices[:, 0] - 0.2, mesh.vertices[:, 1] + 0.1)
    assert r.max() <= 0.5 + 1e-12


def test_half_disc_mesh_markers():
    mesh = half_disc_mesh(3)
    assert mesh.vertices[:, 1].min() >= -1e-15
    assert set(mesh.markers) == {"outer", "symmetry"}
    sym = mesh.vertices[mesh.markers["symmetry"]]
    assert np.abs(sym[:, 1]).max() <= 1e-12


def test_triangle_areas_positive():
    mesh = disc_mesh(4)
    v = mesh.vertices[mesh.triangles]
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    assert areas.min() > 0.0
    assert areas.sum() == pytest.approx(np.pi, rel=5e-3)


def test_degenerate_triangle_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(MeshQualityError):
        Mesh2D(verts, np.array([[0, 1, 2]]))


def test_contains_and_find_triangles():
    mesh = disc_mesh(3)
    rng = np.random.default_rng(5)
    inside = rng.uniform(-0.6, 0.6, (20, 2))
    assert mesh.contains(inside).all()
    assert not mesh.contains(np.array([[1.5, 0.0]]))[0]
    tris = mesh.find_triangles(inside)
    assert (tris >= 0).all()
    # membership: each point has nonnegative barycentric coordinates there
    corners = mesh.vertices[mesh.triangles[tris]]
    for p, c in zip(inside, corners):
        T = np.column_stack([c[1] - c[0], c[2] - c[0]])
        lam = np.linalg.solve(T, p - c[0])
        assert lam.min() >= -1e-10 and lam.sum() <= 1.0 + 1e-10


def test_vertex_index_at():
    mesh = disc_mesh(3)
    idx = mesh.vertex_index_at(mesh.vertices[17])
    assert idx == 17


def test_grid_function_affine_exact():
    # P1 interpolation reproduces affine functions to rounding
    mesh = disc_mesh(4)
    values = 1.0 + 2.0 * mesh.vertices[:, 0] - 0.5 * mesh.vertices[:, 1]
    f = GridFunction(mesh, values)
    rng = np.random.default_rng(11)
    q = rng.uniform(-0.5, 0.5, (30, 2))
    exact = 1.0 + 2.0 * q[:, 0] - 0.5 * q[:, 1]
    assert np.abs(f.values_at(q) - exact).max() < 1e-12
    assert np.abs(f.gradients_at(q) - [2.0, -0.5]).max() < 1e-12
    assert np.abs(f.vertex_gradients() - [2.0, -0.5]).max() < 1e-12


def test_grid_function_eval_with_gradient_consistency():
    mesh = disc_mesh(4)
    f = GridFunction(mesh, np.sin(mesh.vertices[:, 0]) * mesh.vertices[:, 1])
    rng = np.random.default_rng(2)
    q = rng.uniform(-0.7, 0.7, (15, 2))
    v, g = f.eval_with_gradient(q)
    assert np.allclose(v, f.values_at(q))
    assert np.allclose(g, f.gradients_at(q))


def test_grid_function_norms():
    mesh = disc_mesh(4)
    f = GridFunction(mesh, np.ones(len(mesh.vertices)))
    assert f.sup_norm() == 1.0
    # L2 norm of 1 over the unit disc is sqrt(pi)
    assert f.l2_norm() == pytest.approx(np.sqrt(np.pi), rel=5e-3)


def test_grid_function_active_mask():
    mesh = disc_mesh(4)
    values = mesh.vertices[:, 0].copy()
    active = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1]) < 0.5
    f = GridFunction(mesh, values, active=active)
    g = f.vertex_gradients()
    # masked vertices do not contribute; active region still sees exact slope
    assert np.abs(g[active] - [1.0, 0.0]).max() < 1e-10


def test_mesh_to_text_roundtrip_smoke():
    mesh = disc_mesh(2)
    text = mesh.to_text()
    assert str(len(mesh.vertices)) in text
