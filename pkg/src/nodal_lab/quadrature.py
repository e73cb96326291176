"""Shared quadrature rules.

Three families cover everything in the laboratory:

* a tensor rule on the unit disc (Gauss-Legendre in radius against the
  measure rho drho, equally weighted angles), exact for polynomial
  integrands of any moderate degree and spectrally accurate otherwise;
* a Gauss-Legendre rule on the circle parameter for boundary integrals;
* the 7-point degree-5 triangle rule, with midpoint subdivision helpers
  used by the weighted assembly.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def leggauss01(n: int):
    """Gauss-Legendre nodes and weights transplanted to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=8)
def disc_rule(n_r: int = 48, n_t: int = 96):
    """Quadrature for ``int_{B_1} f dx``: points ``(n, 2)`` and weights ``(n,)``.

    Radial Gauss-Legendre against ``rho drho`` tensorized with a uniform
    (trapezoidal, here exact by periodicity) angular grid.  Exact for
    polynomial integrands of total degree below ``n_t - 1``.
    """
    rho, wr = leggauss01(n_r)
    theta = 2.0 * np.pi * np.arange(n_t) / n_t
    wt = 2.0 * np.pi / n_t
    R, T = np.meshgrid(rho, theta, indexing="ij")
    pts = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    w = (wr[:, None] * rho[:, None] * wt * np.ones_like(theta)[None, :]).ravel()
    return pts, w


@lru_cache(maxsize=8)
def circle_rule(n: int = 64):
    """Gauss-Legendre rule for ``int_0^{2 pi} g(theta) dtheta``."""
    t, w = leggauss01(n)
    return 2.0 * np.pi * t, 2.0 * np.pi * w


# 7-point degree-5 triangle rule (barycentric coordinates, weights sum to 1)
_A1 = 0.059715871789770
_B1 = 0.470142064105115
_A2 = 0.797426985353087
_B2 = 0.101286507323456
TRI7_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
TRI7_W = np.array(
    [
        0.225,
        0.132394152788506,
        0.132394152788506,
        0.132394152788506,
        0.125939180544827,
        0.125939180544827,
        0.125939180544827,
    ]
)


def tri_points(corners: np.ndarray, bary: np.ndarray = TRI7_BARY) -> np.ndarray:
    """Map barycentric nodes onto triangles: ``(m, 3, 2) -> (m, q, 2)``."""
    return np.einsum("qk,mkd->mqd", bary, corners)


def split4(corners: np.ndarray) -> np.ndarray:
    """Midpoint refinement ``(m, 3, 2) -> (4 m, 3, 2)``."""
    p0, p1, p2 = corners[:, 0], corners[:, 1], corners[:, 2]
    m01 = 0.5 * (p0 + p1)
    m12 = 0.5 * (p1 + p2)
    m20 = 0.5 * (p2 + p0)
    kids = np.stack(
        [
            np.stack([p0, m01, m20], axis=1),
            np.stack([m01, p1, m12], axis=1),
            np.stack([m20, m12, p2], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ],
        axis=1,
    )
    return kids.reshape(-1, 3, 2)


def tri_areas(corners: np.ndarray) -> np.ndarray:
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def disc_integral(f, radius: float = 1.0, center=(0.0, 0.0), n_r: int = 48, n_t: int = 96) -> float:
    """Integrate a scalar callable-on-points field over a disc."""
    pts, w = disc_rule(n_r, n_t)
    c = np.asarray(center, dtype=float)
    x = c[None, :] + radius * pts
    return float(radius ** 2 * np.dot(f(x), w))


def disc_l2_norm(field, radius: float = 0.5, center=(0.0, 0.0)) -> float:
    """L2 norm of a field (anything with ``.values``) over a disc."""
    return np.sqrt(disc_integral(lambda x: field.values(x) ** 2, radius, center))
