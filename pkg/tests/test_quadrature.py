"""Quadrature rules against closed-form integrals."""

import numpy as np
import pytest

from nodal_lab.quadrature import (
    circle_rule,
    disc_integral,
    disc_l2_norm,
    leggauss01,
    split4,
    tri_areas,
    tri_points,
)
from nodal_lab.fields import parse_polynomial


def test_leggauss01_polynomial_exactness():
    x, w = leggauss01(4)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    for k in range(1, 8):
        # n-point Gauss is exact through degree 2n-1
        assert np.dot(x**k, w) == pytest.approx(1.0 / (k + 1), abs=1e-13)


def test_disc_integral_constants_and_moments():
    assert disc_integral(lambda p: np.ones(len(p))) == pytest.approx(np.pi, rel=1e-12)
    got = disc_integral(lambda p: p[:, 0] ** 2, radius=0.7)
    assert got == pytest.approx(np.pi * 0.7**4 / 4, rel=1e-12)
    # odd moments cancel
    assert abs(disc_integral(lambda p: p[:, 0] * np.ones(len(p)))) < 1e-14


def test_disc_integral_off_center():
    got = disc_integral(lambda p: p[:, 0], radius=0.5, center=(0.3, -0.2))
    assert got == pytest.approx(0.3 * np.pi * 0.25, rel=1e-12)


def test_disc_l2_norm():
    u2 = parse_polynomial("im(z^2)")
    # ||2xy||_{L2(B_r)}^2 = pi r^6 / 6
    exact = np.sqrt(np.pi * 0.5**6 / 6)
    assert disc_l2_norm(u2, radius=0.5) == pytest.approx(exact, rel=1e-12)


def test_circle_rule_trig_moments():
    theta, w = circle_rule(64)
    assert w.sum() == pytest.approx(2 * np.pi, abs=1e-12)
    assert np.dot(np.cos(theta) ** 2, w) == pytest.approx(np.pi, rel=1e-10)
    assert abs(np.dot(np.sin(theta), w)) < 1e-10


def test_tri_areas():
    corners = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    assert tri_areas(corners)[0] == pytest.approx(0.5)


def test_split4_conserves_area():
    rng = np.random.default_rng(11)
    corners = rng.uniform(0, 1, (5, 3, 2))
    sub = split4(corners).reshape(-1, 3, 2)
    got = tri_areas(sub).reshape(5, 4).sum(axis=1)
    assert np.abs(got - tri_areas(corners)).max() < 1e-14


def test_tri_points_rule_degree():
    # the default 7-point rule integrates low-order monomials exactly
    corners = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    pts = tri_points(corners)[0]
    w = np.array([0.225] + [0.13239415278850616] * 3 + [0.12593918054482717] * 3)
    area = 0.5
    # int_T xy over the reference triangle = 1/24
    assert area * np.dot(pts[:, 0] * pts[:, 1], w) == pytest.approx(1.0 / 24.0, rel=1e-10)
    # int_T x^2 = 1/12
    assert area * np.dot(pts[:, 0] ** 2, w) == pytest.approx(1.0 / 12.0, rel=1e-10)
