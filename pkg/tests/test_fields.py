"""Harmonic polynomials, conjugates, and the coefficient-field catalog."""

import numpy as np
import pytest

from nodal_lab.fields import (
    HarmonicPolynomial2D,
    SolutionClassSpec,
    SumField,
    catalog,
    conjugate_constant_matrix,
    constant_field,
    field_gradients,
    field_values,
    harmonic_conjugate,
    homogeneous_basis,
    identity_field,
    parse_polynomial,
)


def test_parse_im_z2():
    u = parse_polynomial("im(z^2)")
    rng = np.random.default_rng(0)
    p = rng.uniform(-1, 1, (40, 2))
    assert np.abs(u.values(p) - 2.0 * p[:, 0] * p[:, 1]).max() < 1e-14
    assert u.degree == 2
    assert u.vanishing_order() == 2


def test_parse_combination():
    u = parse_polynomial("3*re(z^2) - 0.5*im(z^3) + im(z^1)")
    p = np.array([[0.4, -0.3], [0.1, 0.2]])
    x, y = p[:, 0], p[:, 1]
    exact = 3 * (x**2 - y**2) - 0.5 * (3 * x**2 * y - y**3) + y
    assert np.abs(u.values(p) - exact).max() < 1e-14


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_polynomial("3*q + im(z^2)")
    with pytest.raises(ValueError):
        parse_polynomial("")


def test_gradients_match_finite_differences():
    u = parse_polynomial("re(z^3) + 2*im(z^2)")
    rng = np.random.default_rng(1)
    p = rng.uniform(-0.8, 0.8, (20, 2))
    g = u.gradients(p)
    eps = 1e-6
    for k in range(2):
        dp = np.zeros(2)
        dp[k] = eps
        fd = (u.values(p + dp) - u.values(p - dp)) / (2 * eps)
        assert np.abs(g[:, k] - fd).max() < 1e-8


def test_polynomials_are_harmonic():
    # Laplacian vanishes: check via 5-point stencil at random points
    rng = np.random.default_rng(2)
    for text in ("re(z^4)", "im(z^5)", "re(z^2) - 3*im(z^3)"):
        u = parse_polynomial(text)
        p = rng.uniform(-0.5, 0.5, (10, 2))
        h = 1e-4
        lap = (
            u.values(p + [h, 0]) + u.values(p - [h, 0])
            + u.values(p + [0, h]) + u.values(p - [0, h])
            - 4 * u.values(p)
        ) / h**2
        assert np.abs(lap).max() < 1e-5


def test_scaled_argument():
    u = parse_polynomial("im(z^2)")
    us = u.scaled_argument(2.0)
    p = np.array([[0.3, 0.2]])
    assert us.values(p)[0] == pytest.approx(u.values(2 * p)[0], abs=1e-15)


def test_rotated_argument_convention():
    # rotated_argument(theta) evaluates u at z*e^{i theta}
    u = parse_polynomial("im(z^3) + 0.5*re(z^2)")
    theta = 0.37
    ur = u.rotated_argument(theta)
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s], [s, c]])
    rng = np.random.default_rng(3)
    p = rng.uniform(-0.9, 0.9, (25, 2))
    assert np.abs(ur.values(p) - u.values(p @ R.T)).max() < 1e-13


def test_complex_derivative():
    u = parse_polynomial("im(z^3)")
    p = np.array([[0.4, 0.3]])
    # d/dz of z^3 has modulus 3|z|^2 at |z| = 0.5
    d = u.complex_derivative(p)
    assert np.abs(d[0]) == pytest.approx(0.75, rel=1e-12)
    g = u.gradients(p)
    assert np.hypot(g[0, 0], g[0, 1]) == pytest.approx(0.75, rel=1e-12)


def test_homogeneous_basis():
    basis = homogeneous_basis(3)
    assert len(basis) == 2
    p = np.array([[0.5, -0.2]])
    vals = [b.values(p)[0] for b in basis]
    x, y = 0.5, -0.2
    assert sorted(np.round(vals, 12)) == sorted(
        np.round([x**3 - 3 * x * y**2, 3 * x**2 * y - y**3], 12)
    )


def test_harmonic_conjugate_cauchy_riemann():
    u = parse_polynomial("im(z^2)")
    v = harmonic_conjugate(u)
    assert v.values(np.array([[0.3, 0.2]]))[0] == pytest.approx(-0.05, abs=1e-15)
    rng = np.random.default_rng(4)
    p = rng.uniform(-1, 1, (30, 2))
    gu = u.gradients(p)
    gv = v.gradients(p)
    # grad v = J grad u with J the quarter turn
    assert np.abs(gv[:, 0] + gu[:, 1]).max() < 1e-13
    assert np.abs(gv[:, 1] - gu[:, 0]).max() < 1e-13


def test_conjugate_constant_matrix():
    u = parse_polynomial("im(z^2)")
    A = np.diag([2.0, 0.5])
    v = conjugate_constant_matrix(u, A)
    rng = np.random.default_rng(5)
    p = rng.uniform(-1, 1, (20, 2))
    gv = v.gradients(p)
    JA = np.array([[0.0, -1.0], [1.0, 0.0]]) @ A
    expect = u.gradients(p) @ JA.T
    assert np.abs(gv - expect).max() < 1e-13


def test_sum_field():
    a = parse_polynomial("re(z^2)")
    b = parse_polynomial("im(z^1)")
    s = SumField(a, b)
    p = np.array([[0.2, 0.7]])
    assert s.values(p)[0] == pytest.approx(a.values(p)[0] + b.values(p)[0])
    assert np.allclose(s.gradients(p), a.gradients(p) + b.gradients(p))


def test_catalog_ids():
    assert sorted(catalog()) == [
        "gentle-rotation",
        "identity",
        "radial-bump",
        "radial-det1",
        "rotating-aniso",
        "shear",
    ]
    extra = set(catalog(include_test_only=True)) - set(catalog())
    assert extra == {"diag-2-half", "double-identity"}


def test_catalog_ellipticity_bounds():
    # every member is symmetric with eigenvalues inside [lam, lam_max]
    rng = np.random.default_rng(6)
    pts = rng.uniform(-1, 1, (60, 2))
    for name, A in catalog(include_test_only=True).items():
        M = A.at(pts)
        assert np.abs(M - np.swapaxes(M, 1, 2)).max() < 1e-12, name
        eig = np.linalg.eigvalsh(M)
        assert eig.min() >= A.lam - 1e-10, name
        assert eig.max() <= A.lam_max + 1e-10, name


def test_catalog_det_one_members():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.9, 0.9, (40, 2))
    cat = catalog(include_test_only=True)
    for name in ("identity", "radial-det1", "shear", "diag-2-half"):
        assert np.abs(cat[name].det(pts) - 1.0).max() < 1e-12, name


def test_identity_field_flags():
    assert identity_field().is_identity()
    assert not catalog()["gentle-rotation"].is_identity()


def test_constant_field():
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    A = constant_field(M)
    pts = np.array([[0.1, 0.2], [-0.5, 0.4]])
    assert np.allclose(A.at(pts), M)


def test_solution_class_spec():
    spec = SolutionClassSpec(2.0)
    assert spec.a_critical == 1.0
    wide = SolutionClassSpec(4.0)
    assert wide.a_critical == pytest.approx(0.5)
    u2 = parse_polynomial("im(z^2)")
    u3 = parse_polynomial("im(z^3)")
    assert spec.admits(u2, identity_field())
    assert not spec.admits(u3, identity_field())


def test_field_values_dispatch():
    u = parse_polynomial("im(z^2)")
    p = np.array([[0.3, 0.2]])
    assert field_values(u, p)[0] == pytest.approx(0.12)
    g = field_gradients(u, p)
    assert np.allclose(g, [[0.4, 0.6]])


def test_zero_polynomial_representable():
    z = HarmonicPolynomial2D([0.0])
    assert np.all(z.values(np.array([[0.4, 0.1]])) == 0.0)
