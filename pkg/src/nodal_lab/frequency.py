"""Almgren frequency on frozen-coefficient ellipsoids.

For a solution u of div(A grad u) = 0 the frequency at x0 is

    N(x0, u, r) = r D(r) / H(r),
    D(r) = int_{E_r} A(x0) grad u . grad u dx,
    H(r) = int_{dE_r} u^2 dsigma,

where E_r(x0) = x0 + r M (B_1) with M = A(x0)^{1/2}.  The coefficient is
frozen at the center both in the ellipsoid and in the energy density; the
variable-coefficient correction is absorbed into the monotonicity
tolerance.  For u = Re z^N and A = Id the closed form is D = pi N r^{2N},
H = pi r^{2N+1}, so N(r) = N exactly; the quadrature (Gauss-Legendre on
the boundary parameter, a polar tensor rule inside) reproduces this to
1e-6 at the default orders.

The limit N(x0, u, 0+) is the vanishing order of u at x0; `vanishing_order`
extrapolates it on a dyadic radius ladder.  `doubling_check` measures the
companion doubling estimate on mean L^2 integrals, and `critical_radius`
locates the first scale at which the frequency exceeds 1 + eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import NoConvergence, RadiusOutOfDomain, ZeroHeight
from .fields import CoefficientField, field_gradients, field_values
from .quadrature import circle_rule, disc_rule


def _domain_of(u, domain_radius, domain_center):
    if domain_radius is None:
        mesh = getattr(u, "mesh", None)
        if mesh is not None:
            return mesh.radius, np.asarray(mesh.center, dtype=float)
        return np.inf, np.zeros(2)
    center = np.zeros(2) if domain_center is None else np.asarray(domain_center, dtype=float)
    return float(domain_radius), center


def _sqrt_spd(A0: np.ndarray) -> np.ndarray:
    lam, Q = np.linalg.eigh(A0)
    if lam.min() <= 0:
        raise ValueError("coefficient matrix is not positive definite")
    return (Q * np.sqrt(lam)) @ Q.T


@dataclass
class FrequencyProfile:
    """Height, energy and frequency of u over a ladder of ellipsoid radii."""

    center: np.ndarray
    radii: np.ndarray
    H: np.ndarray
    D: np.ndarray
    N: np.ndarray
    frozen_matrix: np.ndarray = field(repr=False, default=None)

    @property
    def monotonicity_defect(self) -> float:
        """Largest decrease of N between consecutive radii (0 if monotone)."""
        if len(self.N) < 2:
            return 0.0
        return float(max(0.0, np.max(self.N[:-1] - self.N[1:])))

    def rows(self):
        for r, h, d, n in zip(self.radii, self.H, self.D, self.N):
            yield r, h, d, n


def frequency_profile(
    u,
    A: CoefficientField,
    x0,
    radii,
    n_boundary: int = 64,
    n_r: int = 48,
    n_t: int = 96,
    domain_radius: float | None = None,
    domain_center=None,
) -> FrequencyProfile:
    """Frequency profile of u at x0 over the given increasing radii."""
    x0 = np.asarray(x0, dtype=float)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    dom_r, dom_c = _domain_of(u, domain_radius, domain_center)
    A0 = A.at(x0)
    M = _sqrt_spd(A0)
    stretch = float(np.sqrt(np.linalg.eigvalsh(A0)[-1]))
    reach = float(np.linalg.norm(x0 - dom_c)) + radii.max() * stretch
    if reach > dom_r * (1.0 + 1e-12):
        raise RadiusOutOfDomain(
            f"ellipsoid of radius {radii.max()} at {x0} reaches {reach:.6g} "
            f"> domain radius {dom_r:.6g}"
        )

    theta, wt = circle_rule(n_boundary)
    circ = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    tang = np.stack([-np.sin(theta), np.cos(theta)], axis=1)
    surf = np.linalg.norm(tang @ M.T, axis=1)  # |M t(theta)|, r factored out

    ypts, yw = disc_rule(n_r, n_t)
    det_m = float(np.linalg.det(M))

    Hs, Ds = np.empty(len(radii)), np.empty(len(radii))
    for i, r in enumerate(radii):
        bpts = x0 + r * (circ @ M.T)
        uvals = field_values(u, bpts)
        Hs[i] = r * float(np.sum(wt * uvals ** 2 * surf))
        if Hs[i] < 1e-14:
            raise ZeroHeight(f"H({r}) = {Hs[i]:.3e} < 1e-14 at {x0}")
        ipts = x0 + r * (ypts @ M.T)
        g = field_gradients(u, ipts)
        dens = np.einsum("nd,de,ne->n", g, A0, g)
        Ds[i] = r ** 2 * det_m * float(np.sum(yw * dens))
    return FrequencyProfile(x0, radii, Hs, Ds, radii * Ds / Hs, frozen_matrix=A0)


def frequency(u, A: CoefficientField, x0, r: float, **kw) -> float:
    """Single-radius frequency N(x0, u, r)."""
    return float(frequency_profile(u, A, x0, [r], **kw).N[0])


def vanishing_order(
    u,
    A: CoefficientField,
    x0,
    r_start: float = 0.25,
    tol: float = 1e-3,
    max_halvings: int = 20,
    r_min: float = 0.0,
    **kw,
) -> float:
    """Vanishing order of u at x0 as the dyadic limit of the frequency.

    Halves the radius until two consecutive frequencies differ by less
    than ``tol``; raises `NoConvergence` after ``max_halvings`` or when
    the ladder would drop below ``r_min`` (set it to a few mesh widths
    for discrete inputs).
    """
    prev = None
    r = float(r_start)
    for _ in range(max_halvings + 1):
        n = frequency(u, A, x0, r, **kw)
        if prev is not None and abs(n - prev) < tol:
            return n
        prev = n
        r *= 0.5
        if r < r_min:
            raise NoConvergence(
                f"frequency ladder hit the radius floor {r_min:.3e} before "
                f"settling (last N = {n:.6f})"
            )
    raise NoConvergence(
        f"frequency at {x0} did not settle within {max_halvings} halvings "
        f"(last N = {prev:.6f})"
    )


class DoublingResult(NamedTuple):
    """Measured doubling data: mean L^2 ratio vs the frequency bound."""

    ratio: float        # mean-integral ratio over solid balls
    bound: float        # (R/r)^{2 N(R)}, C = 1
    raw_ratio: float    # plain mass ratio int_{B_R} u^2 / int_{B_r} u^2
    height_ratio: float # boundary ratio H(R)/H(r)


def doubling_check(u, A: CoefficientField, x0, r: float, R: float, **kw) -> DoublingResult:
    """Doubling estimate at x0: mean L^2 mass over B_R vs B_r.

    The measured ratio of mean integrals over solid Euclidean balls is
    compared with the bound (R/r)^{2 N(x0,u,R)}; for constant A and
    homogeneous u the two agree exactly.
    """
    if not 0 < r <= R:
        raise ValueError("need 0 < r <= R")
    x0 = np.asarray(x0, dtype=float)
    dom_r, dom_c = _domain_of(u, kw.get("domain_radius"), kw.get("domain_center"))
    if float(np.linalg.norm(x0 - dom_c)) + R > dom_r * (1.0 + 1e-12):
        raise RadiusOutOfDomain(f"ball of radius {R} at {x0} leaves the domain")

    ypts, yw = disc_rule(kw.get("n_r", 48), kw.get("n_t", 96))

    def ball_mass(rad):
        vals = field_values(u, x0 + rad * ypts)
        return rad ** 2 * float(np.sum(yw * vals ** 2))

    m_r, m_R = ball_mass(r), ball_mass(R)
    if m_r <= 0:
        raise ZeroHeight(f"vanishing L^2 mass on B_{r} at {x0}")
    raw = m_R / m_r
    ratio = raw * (r / R) ** 2
    prof = frequency_profile(
        u, A, x0, [r, R] if R > r else [r],
        domain_radius=kw.get("domain_radius"), domain_center=kw.get("domain_center"),
    )
    bound = (R / r) ** (2.0 * prof.N[-1])
    height_ratio = float(prof.H[-1] / prof.H[0])
    return DoublingResult(ratio, bound, raw, height_ratio)


def critical_radius(
    u,
    A: CoefficientField,
    x0,
    eps: float,
    r_max: float,
    r_min: float = 1e-2,
    rtol: float = 1e-3,
    **kw,
) -> float | None:
    """First radius at which N(x0, u, r) reaches 1 + eps.

    Returns None when N(r_max) stays below 1 + eps, and r_min when the
    frequency already exceeds the threshold at the smallest probed scale.
    Assumes the profile is monotone nondecreasing in r (up to the
    tolerance built into the frequency itself).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    target = 1.0 + eps
    if frequency(u, A, x0, r_max, **kw) < target:
        return None
    if frequency(u, A, x0, r_min, **kw) >= target:
        return float(r_min)
    lo, hi = r_min, r_max
    while hi - lo > rtol * hi:
        mid = np.sqrt(lo * hi)
        if frequency(u, A, x0, mid, **kw) >= target:
            hi = mid
        else:
            lo = mid
    return float(hi)
