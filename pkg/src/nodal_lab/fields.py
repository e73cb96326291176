"""Planar harmonic polynomials, conjugates, and coefficient fields.

A harmonic polynomial is stored through complex coefficients:

    u(x, y) = Re sum_k c_k z^k,   z = x + i y,

so that u is harmonic by construction and its gradient is read off the
complex derivative, grad u = (Re f', -Im f') with f(z) = sum_k c_k z^k.
The harmonic conjugate pairs with u through the convention

    d_x ubar = -d_y u,    d_y ubar = d_x u,

i.e. ubar = Im f normalized to ubar(0) = 0; for a symmetric coefficient
field A the same convention reads grad ubar = R A grad u with R the
rotation by +pi/2.  The conjugate of a discrete solution is produced by
path integration over a spanning tree of mesh edges.

Every field object here exposes ``values(points)`` and
``gradients(points)`` on arrays of shape ``(n, 2)``.
"""

from __future__ import annotations

import re as _re
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DegenerateField, LoopDefectTooLarge
from .mesh import GridFunction, Mesh2D
from .quadrature import disc_l2_norm

__all__ = [
    "HarmonicPolynomial2D",
    "Poly2D",
    "SumField",
    "CoefficientField",
    "SolutionClassSpec",
    "parse_polynomial",
    "homogeneous_basis",
    "harmonic_conjugate",
    "conjugate_constant_matrix",
    "a_harmonic_conjugate",
    "catalog",
    "identity_field",
    "constant_field",
]


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


class HarmonicPolynomial2D:
    """u = Re sum_k c_k z^k with complex coefficients ``c_k``."""

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        # drop trailing zeros but keep at least the constant term
        nz = np.nonzero(np.abs(c) > 0)[0]
        self.coeffs = c[: nz[-1] + 1] if len(nz) else c[:1]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def vanishing_order(self, tol: float = 1e-12) -> int:
        """Order of the zero at the origin (degree + 1 means u == 0)."""
        scale = np.max(np.abs(self.coeffs))
        if scale == 0:
            return self.degree + 1
        nz = np.nonzero(np.abs(self.coeffs) > tol * scale)[0]
        return int(nz[0]) if len(nz) else self.degree + 1

    # -- evaluation ---------------------------------------------------------

    def values(self, points) -> np.ndarray:
        pts, single = _as_points(points)
        z = pts[:, 0] + 1j * pts[:, 1]
        v = np.polynomial.polynomial.polyval(z, self.coeffs).real
        return v[0] if single else v

    def gradients(self, points) -> np.ndarray:
        pts, single = _as_points(points)
        z = pts[:, 0] + 1j * pts[:, 1]
        dc = np.polynomial.polynomial.polyder(self.coeffs)
        fp = np.polynomial.polynomial.polyval(z, dc)
        g = np.column_stack([fp.real, -fp.imag])
        return g[0] if single else g

    def eval_with_gradient(self, points):
        return self.values(points), self.gradients(points)

    def complex_derivative(self, points) -> np.ndarray:
        pts, single = _as_points(points)
        z = pts[:, 0] + 1j * pts[:, 1]
        fp = np.polynomial.polynomial.polyval(
            z, np.polynomial.polynomial.polyder(self.coeffs)
        )
        return fp[0] if single else fp

    # -- algebra ------------------------------------------------------------

    def scaled_argument(self, s: float) -> "HarmonicPolynomial2D":
        """The polynomial x -> u(s x)."""
        k = np.arange(len(self.coeffs))
        return HarmonicPolynomial2D(self.coeffs * (s ** k))

    def rotated_argument(self, theta: float) -> "HarmonicPolynomial2D":
        """The polynomial x -> u(R_theta x) (argument rotated by theta)."""
        k = np.arange(len(self.coeffs))
        return HarmonicPolynomial2D(self.coeffs * np.exp(1j * k * theta))

    def __mul__(self, c):
        if np.isscalar(c):
            return HarmonicPolynomial2D(self.coeffs * c)
        return NotImplemented

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, HarmonicPolynomial2D):
            n = max(len(self.coeffs), len(other.coeffs))
            c = np.zeros(n, dtype=complex)
            c[: len(self.coeffs)] += self.coeffs
            c[: len(other.coeffs)] += other.coeffs
            return HarmonicPolynomial2D(c)
        return NotImplemented

    def __sub__(self, other):
        return self + (-1.0) * other

    def to_poly2d(self) -> "Poly2D":
        """Expand into a real bivariate polynomial in (x, y)."""
        d = self.degree
        C = np.zeros((d + 1, d + 1))
        for k, ck in enumerate(self.coeffs):
            if ck == 0:
                continue
            a, b = ck.real, ck.imag
            # z^k = sum_j C(k, j) x^(k-j) (i y)^j; real part keeps j even,
            # imaginary part keeps j odd
            for j in range(k + 1):
                binom = _binomial(k, j)
                if j % 2 == 0:
                    sign = (-1.0) ** (j // 2)
                    C[k - j, j] += a * binom * sign  # from a * Re z^k
                else:
                    sign = (-1.0) ** ((j - 1) // 2)
                    C[k - j, j] += -b * binom * sign  # from -b * Im z^k
        return Poly2D(C)

    def __repr__(self):
        terms = []
        for k, ck in enumerate(self.coeffs):
            if ck.real != 0:
                terms.append(f"{ck.real:g}*re(z^{k})")
            if ck.imag != 0:
                terms.append(f"{-ck.imag:g}*im(z^{k})")
        return " + ".join(terms) if terms else "0"


def _binomial(n, k):
    out = 1
    for i in range(k):
        out = out * (n - i) // (i + 1)
    return out


class Poly2D:
    """Dense real bivariate polynomial ``sum C[i, j] x^i y^j``."""

    def __init__(self, coeffs):
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))

    @classmethod
    def monomial(cls, i: int, j: int, c: float = 1.0) -> "Poly2D":
        C = np.zeros((i + 1, j + 1))
        C[i, j] = c
        return cls(C)

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.coeffs)
        if len(nz[0]) == 0:
            return 0
        return int(np.max(nz[0] + nz[1]))

    def values(self, points) -> np.ndarray:
        pts, single = _as_points(points)
        v = np.polynomial.polynomial.polyval2d(pts[:, 0], pts[:, 1], self.coeffs)
        return v[0] if single else v

    def partial(self, axis: int) -> "Poly2D":
        C = self.coeffs
        if axis == 0:
            if C.shape[0] == 1:
                return Poly2D([[0.0]])
            i = np.arange(1, C.shape[0])
            return Poly2D(C[1:, :] * i[:, None])
        if C.shape[1] == 1:
            return Poly2D([[0.0]])
        j = np.arange(1, C.shape[1])
        return Poly2D(C[:, 1:] * j[None, :])

    def gradients(self, points) -> np.ndarray:
        pts, single = _as_points(points)
        gx = self.partial(0).values(pts)
        gy = self.partial(1).values(pts)
        g = np.column_stack([gx, gy])
        return g[0] if single else g

    def eval_with_gradient(self, points):
        return self.values(points), self.gradients(points)

    def __add__(self, other):
        if isinstance(other, Poly2D):
            s0 = max(self.coeffs.shape[0], other.coeffs.shape[0])
            s1 = max(self.coeffs.shape[1], other.coeffs.shape[1])
            C = np.zeros((s0, s1))
            C[: self.coeffs.shape[0], : self.coeffs.shape[1]] += self.coeffs
            C[: other.coeffs.shape[0], : other.coeffs.shape[1]] += other.coeffs
            return Poly2D(C)
        return NotImplemented

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if np.isscalar(other):
            return Poly2D(self.coeffs * other)
        if isinstance(other, Poly2D):
            return Poly2D(convolve2d(self.coeffs, other.coeffs))
        return NotImplemented

    __rmul__ = __mul__


class SumField:
    """Pointwise sum of fields (used for approximating pairs u + phi)."""

    def __init__(self, *parts):
        self.parts = parts

    def values(self, points):
        return sum(field_values(p, points) for p in self.parts)

    def gradients(self, points):
        return sum(field_gradients(p, points) for p in self.parts)

    def eval_with_gradient(self, points):
        return self.values(points), self.gradients(points)


# ---------------------------------------------------------------------------
# parsing and bases
# ---------------------------------------------------------------------------

_TERM = _re.compile(
    r"\s*(?P<sign>[+-])?\s*"
    r"(?:(?P<coef>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)\s*\*?\s*)?"
    r"(?:(?P<fun>re|im)\s*\(\s*z\s*(?:\^\s*(?P<pow>\d+))?\s*\))?"
)


def parse_polynomial(text: str) -> HarmonicPolynomial2D:
    """Parse literals of the form ``"re(z^2) + 0.5*im(z^3)"``.

    Terms are signed products of an optional real coefficient and one of
    ``re(z^k)`` / ``im(z^k)`` (``re(z)`` means ``k = 1``); a bare number is a
    constant term.
    """
    coeffs: dict[int, complex] = {}
    pos = 0
    found = False
    while pos < len(text):
        m = _TERM.match(text, pos)
        if m is None or m.end() == pos:
            raise ValueError(f"cannot parse polynomial literal at: {text[pos:]!r}")
        if m.group("coef") is None and m.group("fun") is None:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"cannot parse polynomial literal at: {text[pos:]!r}")
        sign = -1.0 if m.group("sign") == "-" else 1.0
        coef = sign * float(m.group("coef") or 1.0)
        fun = m.group("fun")
        if fun is None:
            k, c = 0, complex(coef)  # bare constant
        else:
            k = int(m.group("pow") or 1)
            # im(z^k) = Re(-i z^k)
            c = complex(coef) if fun == "re" else -1j * coef
        coeffs[k] = coeffs.get(k, 0.0) + c
        pos = m.end()
        found = True
    if not found:
        raise ValueError("empty polynomial literal")
    out = np.zeros(max(coeffs) + 1, dtype=complex)
    for k, c in coeffs.items():
        out[k] = c
    return HarmonicPolynomial2D(out)


def homogeneous_basis(n: int):
    """The two n-homogeneous harmonics ``(Re z^n, Im z^n)``; requires n >= 1."""
    if n < 1:
        raise ValueError("homogeneous basis needs degree n >= 1")
    c = np.zeros(n + 1, dtype=complex)
    c[n] = 1.0
    re_part = HarmonicPolynomial2D(c)
    c = np.zeros(n + 1, dtype=complex)
    c[n] = -1j
    im_part = HarmonicPolynomial2D(c)
    return re_part, im_part


# ---------------------------------------------------------------------------
# conjugates
# ---------------------------------------------------------------------------

_ROT = np.array([[0.0, -1.0], [1.0, 0.0]])  # rotation by +pi/2


def harmonic_conjugate(u: HarmonicPolynomial2D) -> HarmonicPolynomial2D:
    """The conjugate ubar = Im f - Im f(0) (so d_x ubar = -d_y u)."""
    c = -1j * u.coeffs
    c = c.copy()
    c[0] -= u.coeffs[0].imag
    return HarmonicPolynomial2D(c)


def conjugate_constant_matrix(u: HarmonicPolynomial2D, A: np.ndarray) -> Poly2D:
    """A-harmonic conjugate of a polynomial u for a constant matrix A.

    Integrates the exact differential R A grad u radially from the origin;
    requires div(A grad u) = 0, which makes the differential closed.
    """
    A = np.asarray(A, dtype=float)
    up = u.to_poly2d() if hasattr(u, "to_poly2d") else u
    ux, uy = up.partial(0), up.partial(1)
    v1 = (-A[1, 0]) * ux + (-A[1, 1]) * uy
    v2 = A[0, 0] * ux + A[0, 1] * uy
    w = Poly2D.monomial(1, 0) * v1 + Poly2D.monomial(0, 1) * v2
    C = w.coeffs.copy()
    for i in range(C.shape[0]):
        for j in range(C.shape[1]):
            if C[i, j] != 0.0:
                C[i, j] /= i + j
    return Poly2D(C)


def a_harmonic_conjugate(
    u: GridFunction,
    A: "CoefficientField",
    loop_tol: float | None = None,
) -> GridFunction:
    """Conjugate of a discrete solution by spanning-tree path integration.

    The differential ``omega = R A grad u`` is integrated with the trapezoid
    rule along a breadth-first spanning tree of mesh edges rooted at the
    vertex nearest the mesh center, and pinned to zero there.  Consistency is
    checked on elementary loops: the circulation of ``omega`` around every
    triangle must stay below ``loop_tol`` (default ``0.25 h^2 max|omega|``),
    which an A-harmonic u satisfies with an O(h) margin while a non-closed
    differential does not.
    """
    mesh = u.mesh
    vg = u.vertex_gradients()
    Av = A(mesh.vertices)
    omega = np.einsum("ij,njk,nk->ni", _ROT, Av, vg)

    edges = mesh.edges
    dxy = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    integral = 0.5 * np.sum((omega[edges[:, 0]] + omega[edges[:, 1]]) * dxy, axis=1)

    # elementary loop defect: oriented circulation around each triangle
    tri = mesh.triangles
    circ = np.zeros(len(tri))
    edge_key = {tuple(e): k for k, e in enumerate(map(tuple, edges))}
    for a_loc, b_loc in ((0, 1), (1, 2), (2, 0)):
        va, vb = tri[:, a_loc], tri[:, b_loc]
        lo = np.minimum(va, vb)
        hi = np.maximum(va, vb)
        keys = np.array([edge_key[(int(x), int(y))] for x, y in zip(lo, hi)])
        sign = np.where(va < vb, 1.0, -1.0)
        circ += sign * integral[keys]
    omega_max = float(np.max(np.linalg.norm(omega, axis=1)))
    defect = float(np.max(np.abs(circ)))
    tol = loop_tol if loop_tol is not None else 0.25 * mesh.h ** 2 * max(omega_max, 1e-300)
    if defect > tol:
        raise LoopDefectTooLarge(
            f"conjugate differential inconsistent: loop defect {defect:.3e} > {tol:.3e}"
        )

    # breadth-first tree from the vertex nearest the center
    root = int(np.argmin(np.linalg.norm(mesh.vertices - np.asarray(mesh.center), axis=1)))
    nv = len(mesh.vertices)
    adj: list[list[tuple[int, int, float]]] = [[] for _ in range(nv)]
    for k, (a, b) in enumerate(edges):
        adj[a].append((b, k, 1.0))
        adj[b].append((a, k, -1.0))
    vals = np.full(nv, np.nan)
    vals[root] = 0.0
    queue = [root]
    while queue:
        nxt = []
        for a in queue:
            for b, k, s in adj[a]:
                if np.isnan(vals[b]):
                    vals[b] = vals[a] + s * integral[k]
                    nxt.append(b)
        queue = nxt
    if np.isnan(vals).any():
        raise LoopDefectTooLarge("mesh is not edge-connected")
    ubar = GridFunction(mesh, vals)
    # pin ubar(center) = 0 exactly even if the root is off-center
    ubar = GridFunction(mesh, vals - ubar.values_at(np.asarray(mesh.center))[0])
    return ubar


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientField:
    """Symmetric uniformly elliptic 2x2 coefficient field.

    ``matrix(points)`` maps ``(n, 2)`` to ``(n, 2, 2)``.  ``lam``/``lam_max``
    are ellipticity bounds on the working ball, ``lip`` a Lipschitz bound on
    the entries; ``in_class`` marks members normalized to A(0) = Id.
    """

    name: str
    matrix: callable
    lam: float
    lam_max: float
    lip: float
    in_class: bool = True

    def __call__(self, points) -> np.ndarray:
        pts, single = _as_points(points)
        out = self.matrix(pts)
        return out[0] if single else out

    def at(self, point) -> np.ndarray:
        return self(np.asarray(point, dtype=float))

    def det(self, points) -> np.ndarray:
        M = self(np.atleast_2d(np.asarray(points, dtype=float)))
        return np.linalg.det(M)

    def is_identity(self) -> bool:
        return self.name == "identity"


def _broadcast_const(M):
    M = np.asarray(M, dtype=float)

    def matrix(pts):
        return np.broadcast_to(M, (len(pts), 2, 2)).copy()

    return matrix


def identity_field() -> CoefficientField:
    return CoefficientField("identity", _broadcast_const(np.eye(2)), 1.0, 1.0, 0.0, True)


def constant_field(M, name="constant") -> CoefficientField:
    M = np.asarray(M, dtype=float)
    ev = np.linalg.eigvalsh(M)
    in_class = bool(np.allclose(M, np.eye(2)))
    return CoefficientField(name, _broadcast_const(M), float(ev[0]), float(ev[1]), 0.0, in_class)


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _radial_det1(c):
    def matrix(pts):
        r = np.linalg.norm(pts, axis=1)
        out = np.zeros((len(pts), 2, 2))
        out[:, 0, 0] = 1.0 + c * r
        out[:, 1, 1] = 1.0 / (1.0 + c * r)
        return out

    return matrix

def _gentle_rotation(c, theta0):
    Q = _rotation(theta0)

    def matrix(pts):
        r = np.linalg.norm(pts, axis=1)
        D = np.zeros((len(pts), 2, 2))
        D[:, 0, 0] = 1.0 + c * r
        D[:, 1, 1] = 1.0
        return np.einsum("ij,njk,lk->nil", Q, D, Q)

    return matrix


def _shear(c):
    def matrix(pts):
        x = pts[:, 0]
        out = np.empty((len(pts), 2, 2))
        out[:, 0, 0] = 1.0
        out[:, 0, 1] = c * x
        out[:, 1, 0] = c * x
        out[:, 1, 1] = 1.0 + (c * x) ** 2
        return out

    return matrix


def _rotating_aniso(c, omega):
    def matrix(pts):
        r = np.linalg.norm(pts, axis=1)
        ang = omega * r
        cos, sin = np.cos(ang), np.sin(ang)
        d = 1.0 + c * r ** 2
        # Q diag(d, 1) Q^T assembled entrywise
        out = np.empty((len(pts), 2, 2))
        out[:, 0, 0] = d * cos ** 2 + sin ** 2
        out[:, 0, 1] = (d - 1.0) * cos * sin
        out[:, 1, 0] = out[:, 0, 1]
        out[:, 1, 1] = d * sin ** 2 + cos ** 2
        return out

    return matrix


def _radial_bump(c):
    def matrix(pts):
        r2 = np.sum(pts ** 2, axis=1)
        f = 1.0 + c * r2 * np.exp(1.0 - r2)
        out = np.zeros((len(pts), 2, 2))
        out[:, 0, 0] = f
        out[:, 1, 1] = f
        return out

    return matrix


def catalog(include_test_only: bool = False) -> dict[str, CoefficientField]:
    """The coefficient catalog.

    Six members are normalized to ``A(0) = Id`` (class candidates); the two
    constant extras violate that normalization and exist for solver and
    hodograph tests.  Lipschitz constants are kept gentle on purpose: the
    frozen-center frequency is only approximately monotone, with a drift
    proportional to the coefficient variation.
    """
    entries = {
        "identity": identity_field(),
        "radial-det1": CoefficientField("radial-det1", _radial_det1(0.1), 0.8, 1.25, 0.25),
        "gentle-rotation": CoefficientField(
            "gentle-rotation", _gentle_rotation(0.1, np.pi / 6), 1.0, 1.25, 0.15
        ),
        "shear": CoefficientField("shear", _shear(0.15), 0.8, 1.3, 0.35),
        "rotating-aniso": CoefficientField(
            "rotating-aniso", _rotating_aniso(0.2, 0.5), 1.0, 1.5, 0.8
        ),
        "radial-bump": CoefficientField("radial-bump", _radial_bump(0.15), 1.0, 1.5, 0.35),
    }
    if include_test_only:
        entries["diag-2-half"] = constant_field(np.diag([2.0, 0.5]), "diag-2-half")
        entries["double-identity"] = constant_field(2.0 * np.eye(2), "double-identity")
    return entries


# ---------------------------------------------------------------------------
# solution class bookkeeping
# ---------------------------------------------------------------------------


@dataclass
class SolutionClassSpec:
    """Normalization contract for weights: zero at the origin, bounded
    frequency, unit L2 size on the half ball.

    ``frequency_bound`` is the declared cap N0; the critical exponent
    ``a_critical = min(1, 2 / N0)`` bounds admissible weight powers from
    below (a > -a_critical).
    """

    frequency_bound: float
    lam: float = 0.5
    lam_max: float = 2.0
    lip: float = 1.0

    @property
    def a_critical(self) -> float:
        return min(1.0, 2.0 / self.frequency_bound)

    def normalize(self, u):
        """Rescale a polynomial to unit L2 norm on the half ball B_{1/2}."""
        nrm = disc_l2_norm(u, radius=0.5)
        if nrm == 0:
            raise DegenerateField("cannot normalize the zero field")
        return u * (1.0 / nrm)

    def admits(self, u, A: CoefficientField, tol: float = 1e-8) -> bool:
        """Check membership: u(0) = 0 and frequency at radius 1 within bound."""
        from .frequency import frequency_profile  # local import to avoid a cycle

        scale = disc_l2_norm(u, radius=0.5)
        if scale == 0 or abs(float(u.values(np.zeros(2)))) > tol * scale:
            return False
        prof = frequency_profile(u, A, (0.0, 0.0), [1.0], domain_radius=np.inf)
        return bool(prof.N[0] <= self.frequency_bound + tol)


def field_values(u, points) -> np.ndarray:
    """Evaluate any field-like object: polynomials expose ``values`` as a
    method, grid functions as the nodal array with ``values_at`` alongside."""
    v = getattr(u, "values", None)
    if callable(v):
        return v(points)
    return u.values_at(points)


def field_gradients(u, points) -> np.ndarray:
    g = getattr(u, "gradients", None)
    if callable(g):
        return g(points)
    return u.gradients_at(points)
