"""Hodograph straightening of nodal components onto the half-plane.

For a solution u of div(A grad u) = 0 with constant det A, the map
Theta = (ubar, u) built from the stream-function conjugate ubar sends
each nodal component of {u != 0} into the upper half-plane {t > 0} and
its nodal boundary onto {t = 0}.  In the straightened variables the
weighted operator becomes div(|t|^a B grad .) with B = diag(det A, 1),
so solutions on crooked components can be compared against the exactly
solvable half-plane problem, and entire profiles can be tested against
the polynomial dictionary P(ubar, u).

Theta is inverted by damped Newton iteration with the analytic Jacobian
[grad ubar; +-grad u], seeded from the nearest point of a forward-image
cache; the map is only locally invertible, and the cache keeps Newton in
the basin belonging to the selected component.  Theta^{-1}(0) is pinned
to the singular point itself, where the Jacobian degenerates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateField,
    InverseMapFailure,
    NonConstantDeterminant,
    RankDeficientDictionary,
)
from .fem import weak_residual
from .fields import (
    HarmonicPolynomial2D,
    Poly2D,
    a_harmonic_conjugate,
    conjugate_constant_matrix,
    field_gradients,
    field_values,
    harmonic_conjugate,
)
from .mesh import GridFunction, Mesh2D
from .quadrature import disc_rule

__all__ = [
    "HodographMap",
    "LaHarmonicBasis",
    "LiouvilleFit",
    "build_map",
    "straightened_matrix",
    "pushforward",
    "la_harmonic_basis",
    "liouville_fit",
]

DET_TOL = 1e-10


def _eval(f, points: np.ndarray) -> np.ndarray:
    """Evaluate a field, a GridFunction, or a bare callable on points."""
    try:
        return np.asarray(field_values(f, points), dtype=float)
    except AttributeError:
        return np.asarray(f(points), dtype=float)


# ---------------------------------------------------------------------------
# the map
# ---------------------------------------------------------------------------


@dataclass
class HodographMap:
    """Forward/inverse evaluators for Theta = (ubar, +-u).

    ``sign`` is +1 on components where u > 0 and -1 where u < 0; the
    second coordinate is sign*u so the component always lands in {t > 0}.
    """

    u: object
    ubar: object
    A_matrix: np.ndarray
    seed: np.ndarray
    sign: int
    cache_points: np.ndarray = field(repr=False)
    cache_images: np.ndarray = field(repr=False)
    singular_point: np.ndarray = field(default_factory=lambda: np.zeros(2))
    radius: float = 1.0

    @property
    def det_A(self) -> float:
        return float(np.linalg.det(self.A_matrix))

    def forward(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        st = np.column_stack(
            [field_values(self.ubar, pts), self.sign * field_values(self.u, pts)]
        )
        return st[0] if np.asarray(points).ndim == 1 else st

    def jacobian(self, points) -> np.ndarray:
        """D Theta rows: (grad ubar; sign * grad u), shape (n, 2, 2)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        J = np.empty((len(pts), 2, 2))
        J[:, 0, :] = field_gradients(self.ubar, pts)
        J[:, 1, :] = self.sign * field_gradients(self.u, pts)
        return J

    def _forward_one(self, p: np.ndarray) -> np.ndarray | None:
        # GridFunction fields raise outside the mesh; report as "no value"
        try:
            return self.forward(p)
        except ValueError:
            return None

    def _invert_one(self, st: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
        t_norm = float(np.hypot(*st))
        if t_norm == 0.0:
            return self.singular_point.copy()
        k = int(np.argmin(np.sum((self.cache_images - st) ** 2, axis=1)))
        p = self.cache_points[k].copy()
        r = self.forward(p) - st
        for _ in range(max_iter):
            rn = float(np.hypot(*r))
            if rn <= tol * (1.0 + t_norm):
                return p
            J = self.jacobian(p)[0]
            det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
            if abs(det) < 1e-300:
                raise InverseMapFailure(f"Jacobian singular at {p} while inverting {st}")
            d = np.array(
                [J[1, 1] * -r[0] - J[0, 1] * -r[1], -J[1, 0] * -r[0] + J[0, 0] * -r[1]]
            ) / det
            lam, accepted = 1.0, False
            while lam >= 2.0 ** -24:
                q = p + lam * d
                if np.hypot(*(q - self.singular_point)) <= 1.5 * self.radius:
                    rq = self._forward_one(q)
                    if rq is not None and np.hypot(*(rq - st)) < rn:
                        p, r = q, rq - st
                        accepted = True
                        break
                lam *= 0.5
            if not accepted:
                # progress can legitimately stop at roundoff; only a stall
                # above the guaranteed tolerance is a failure
                if rn <= 1e-10 * (1.0 + t_norm):
                    return p
                raise InverseMapFailure(
                    f"damped Newton stalled at residual {rn:.2e} inverting {st}"
                )
        if float(np.hypot(*r)) <= 1e-10 * (1.0 + t_norm):
            return p
        raise InverseMapFailure(f"no convergence after {max_iter} iterations at {st}")

    def inverse(self, targets, tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
        t2 = np.atleast_2d(np.asarray(targets, dtype=float))
        out = np.empty_like(t2)
        for i, st in enumerate(t2):
            out[i] = self._invert_one(st, tol, max_iter)
        return out[0] if np.asarray(targets).ndim == 1 else out


def _component_cache(u, seed, sign, radius, center, n_cache, rng):
    """Deterministic sample of the nodal component holding the seed.

    Membership is tested along the straight segment from the seed: u must
    keep its sign on every sample of the segment.  Exact for the sector
    components of homogeneous fields (which are convex) and a safe inner
    approximation in general.
    """
    seed = np.asarray(seed, dtype=float)
    tline = np.linspace(0.0, 1.0, 33)
    kept = [seed[None, :]]
    total = 1
    for _ in range(40):
        if total >= n_cache:
            break
        m = 4 * n_cache
        rho = radius * np.sqrt(rng.random(m))
        phi = 2.0 * np.pi * rng.random(m)
        pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi)]) + center
        seg = seed + tline[None, :, None] * (pts[:, None, :] - seed)
        try:
            vals = field_values(u, seg.reshape(-1, 2)).reshape(m, -1)
        except ValueError:
            continue
        ok = np.min(sign * vals, axis=1) > 0.0
        if np.any(ok):
            kept.append(pts[ok])
            total += int(np.sum(ok))
    pts = np.concatenate(kept)[:n_cache]
    if len(pts) < 32:
        raise DegenerateField(
            f"component around seed {seed} too thin to sample ({len(pts)} points)"
        )
    return pts


def build_map(u, A, seed, radius: float | None = None, n_cache: int = 1024) -> HodographMap:
    """Hodograph map for the nodal component containing ``seed``.

    ``u`` may be a polynomial field or a GridFunction solution; ``A`` must
    have constant determinant on the working disc (checked on a sample;
    the conjugate construction is only exact in that case).
    """
    seed = np.asarray(seed, dtype=float)
    mesh = getattr(u, "mesh", None)
    center = np.asarray(getattr(mesh, "center", (0.0, 0.0)), dtype=float)
    if radius is None:
        radius = 0.98 * float(getattr(mesh, "radius", 1.0))

    rng = np.random.default_rng(1234)
    rho = radius * np.sqrt(rng.random(256))
    phi = 2.0 * np.pi * rng.random(256)
    probe = np.column_stack([rho * np.cos(phi), rho * np.sin(phi)]) + center
    probe = np.vstack([probe, seed[None, :]])
    dets = np.linalg.det(A(probe))
    spread = float(np.max(dets) - np.min(dets))
    if spread > DET_TOL * max(1.0, float(np.max(np.abs(dets)))):
        raise NonConstantDeterminant(
            f"det A varies by {spread:.2e} over the working region"
        )
    A_matrix = np.asarray(A(seed[None, :])[0], dtype=float)

    s_val = float(field_values(u, seed[None, :])[0])
    if s_val == 0.0:
        raise DegenerateField("component seed lies on the nodal set")
    sign = 1 if s_val > 0.0 else -1

    if isinstance(u, GridFunction):
        ubar = a_harmonic_conjugate(u, A)
    else:
        ubar = conjugate_constant_matrix(u, A_matrix)

    cache_points = _component_cache(u, seed, sign, radius, center, n_cache, rng)
    hmap = HodographMap(
        u=u,
        ubar=ubar,
        A_matrix=A_matrix,
        seed=seed,
        sign=sign,
        cache_points=cache_points,
        cache_images=np.empty((0, 2)),
        singular_point=center.copy(),
        radius=radius,
    )
    hmap.cache_images = hmap.forward(cache_points)
    return hmap


# ---------------------------------------------------------------------------
# straightening
# ---------------------------------------------------------------------------


class StraightenedMatrix:
    """Constant matrix field B(s, t) = diag(det A, 1) with its measured defect.

    ``defect`` is the largest deviation of the directly computed
    (1/|det DTheta|) DTheta A DTheta^T from the diagonal form over the
    verification sample.
    """

    def __init__(self, det_A: float, defect: float):
        self.det_A = float(det_A)
        self.defect = float(defect)
        self.matrix = np.diag([self.det_A, 1.0])

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.broadcast_to(self.matrix, (len(pts), 2, 2)).copy()


def straightened_matrix(A, hmap: HodographMap, n_check: int = 64) -> StraightenedMatrix:
    """B = diag(det A, 1), verified against the direct product formula.

    The direct formula is evaluated at sampled component points x (so the
    composition with Theta^{-1} is implicit: B values belong to Theta(x)).
    """
    pts = hmap.cache_points[:n_check]
    J = hmap.jacobian(pts)
    Av = A(pts)
    dets = np.abs(np.linalg.det(J))
    direct = np.einsum("nij,njk,nlk->nil", J, Av, J) / dets[:, None, None]
    target = np.diag([hmap.det_A, 1.0])
    defect = float(np.max(np.abs(direct - target)))
    return StraightenedMatrix(hmap.det_A, defect)


def pushforward(w, hmap: HodographMap, a: float, halfplane_mesh: Mesh2D):
    """Push a component solution w onto the half-plane: wbar = w o Theta^{-1}.

    Returns ``(wbar, residual)`` where ``wbar`` lives on the half-plane
    mesh and ``residual`` is the weak residual of wbar for the operator
    div(|t|^a B grad .) with B = diag(det A, 1), so a genuine solution
    pushed forward stays a solution.
    """
    targets = halfplane_mesh.vertices
    pre = hmap.inverse(targets)
    if isinstance(w, GridFunction):
        # preimages of rim targets land on the circle, outside the inscribed
        # mesh polygon; pull them radially until point location succeeds
        # (the shift is bounded by the chord sagitta, O(h^2))
        c = np.asarray(w.mesh.center, dtype=float)
        pre = pre.copy()
        for _ in range(200):
            outside = w.mesh.find_triangles(pre) < 0
            if not np.any(outside):
                break
            pre[outside] = c + (pre[outside] - c) * 0.9995
        else:
            raise InverseMapFailure("preimages could not be located in the source mesh")
    vals = _eval(w, pre)
    wbar = GridFunction(halfplane_mesh, vals)
    residual = weak_residual(wbar, None, None, halfplane_a=a, B=np.diag([hmap.det_A, 1.0]))
    return wbar, residual


# ---------------------------------------------------------------------------
# the polynomial dictionary
# ---------------------------------------------------------------------------


def _divide_by_t(p: Poly2D) -> Poly2D:
    """p / t for a polynomial with no t-free terms (exact division)."""
    C = p.coeffs
    if C.shape[1] == 1:
        if np.max(np.abs(C)) == 0.0:
            return Poly2D(np.zeros((1, 1)))
        raise ValueError("polynomial not divisible by t")
    if np.max(np.abs(C[:, 0])) != 0.0:
        raise ValueError("polynomial not divisible by t")
    return Poly2D(C[:, 1:].copy())


@dataclass
class LaHarmonicBasis:
    """Homogeneous t-even solutions of div(|t|^a grad P) = 0, degrees 0..k.

    One basis element per total degree, normalized monic in s^m, so
    P_m(s, 0) = s^m and the trace degree equals the full degree.
    """

    a: float
    degree: int
    polys: list

    def verify(self, tol: float = 1e-12) -> float:
        """Largest coefficient of Delta P + (a/t) dP/dt over the basis.

        The operator identity must hold as an exact polynomial identity;
        returns the worst relative coefficient residual.
        """
        worst = 0.0
        for P in self.polys:
            lap = P.partial(0).partial(0) + P.partial(1).partial(1)
            sing = _divide_by_t(P.partial(1))
            n = max(lap.coeffs.shape[0], sing.coeffs.shape[0])
            m = max(lap.coeffs.shape[1], sing.coeffs.shape[1])
            R = np.zeros((n, m))
            R[: lap.coeffs.shape[0], : lap.coeffs.shape[1]] += lap.coeffs
            R[: sing.coeffs.shape[0], : sing.coeffs.shape[1]] += self.a * sing.coeffs
            scale = max(1.0, float(np.max(np.abs(P.coeffs))))
            worst = max(worst, float(np.max(np.abs(R))) / scale)
        if worst > tol:
            raise AssertionError(f"basis residual {worst:.2e} exceeds {tol:.1e}")
        return worst


def la_harmonic_basis(a: float, k: int) -> LaHarmonicBasis:
    """Basis of t-even polynomials with div(|t|^a grad P) = 0, degree <= k.

    For each degree m the coefficients of P = sum_j c_j s^(m-j) t^j (j
    even) satisfy the two-term recursion
        c_j = -c_(j-2) (m-j+2)(m-j+1) / (j (j-1+a)),  c_0 = 1,
    whose denominators never vanish for a > -1.  At a = 0 this reproduces
    the y-even harmonic polynomials Re z^m.
    """
    if a <= -1.0:
        raise ValueError("la_harmonic_basis requires a > -1")
    if k < 0:
        raise ValueError("degree bound must be nonnegative")
    polys = []
    for m in range(k + 1):
        C = np.zeros((m + 1, m + 1))
        c = 1.0
        C[m, 0] = c
        for j in range(2, m + 1, 2):
            c *= -(m - j + 2) * (m - j + 1) / (j * (j - 1 + a))
            C[m - j, j] = c
        polys.append(Poly2D(C))
    basis = LaHarmonicBasis(a=a, degree=k, polys=polys)
    basis.verify()
    return basis


# ---------------------------------------------------------------------------
# Liouville-type classification
# ---------------------------------------------------------------------------


@dataclass
class LiouvilleFit:
    """Least-squares representation w ~ sum_j c_j P_j(ubar, u).

    ``residuals`` holds the relative L2 misfit per sampled disc radius;
    the fit is classified SUCCESS only if every radius is matched.
    """

    coefficients: np.ndarray
    radii: np.ndarray
    residuals: np.ndarray
    classification: str
    basis: LaHarmonicBasis

    def rows(self):
        return [(float(r), float(e)) for r, e in zip(self.radii, self.residuals)]


def liouville_fit(
    w,
    u,
    a: float,
    gamma: float,
    radii=(1.0, 2.0, 4.0, 8.0),
    ubar=None,
    n_r: int = 24,
    n_t: int = 48,
    success_tol: float = 1e-6,
) -> LiouvilleFit:
    """Fit samples of w on expanding discs to the dictionary {P_j(ubar, u)}.

    ``u`` must be a homogeneous harmonic polynomial of degree d; the
    dictionary is la_harmonic_basis(a, floor(gamma/d)) composed with the
    hodograph pair, which is exactly the form an entire profile of growth
    gamma must take.  A profile outside the span (the classical
    inadmissible t|t|^(-a) branch, for instance) keeps a residual bounded
    away from zero at every radius.
    """
    d = int(u.degree)
    if d <= 0:
        raise ValueError("u must have positive degree")
    if ubar is None:
        ubar = (
            harmonic_conjugate(u)
            if isinstance(u, HarmonicPolynomial2D)
            else conjugate_constant_matrix(u, np.eye(2))
        )
    k = int(np.floor(gamma / d + 1e-12))
    basis = la_harmonic_basis(a, k)

    base_pts, base_w = disc_rule(n_r, n_t)
    radii = np.asarray(radii, dtype=float)
    blocks, targets, slices = [], [], []
    start = 0
    for R in radii:
        pts = R * base_pts
        wq = base_w * R ** 2
        st = np.column_stack([_eval(ubar, pts), _eval(u, pts)])
        cols = np.column_stack([P.values(st) for P in basis.polys])
        sq = np.sqrt(wq)
        blocks.append(cols * sq[:, None])
        targets.append(_eval(w, pts) * sq)
        slices.append(slice(start, start + len(pts)))
        start += len(pts)
    M = np.vstack(blocks)
    y = np.concatenate(targets)

    col_scale = np.linalg.norm(M, axis=0)
    if np.any(col_scale == 0.0):
        raise RankDeficientDictionary("composed dictionary contains a zero column")
    Ms = M / col_scale
    coef_s, _, rank, sv = np.linalg.lstsq(Ms, y, rcond=None)
    if rank < Ms.shape[1] or sv[-1] < 1e-12 * sv[0]:
        raise RankDeficientDictionary(
            f"composed dictionary is rank deficient ({rank}/{Ms.shape[1]}, "
            f"condition {sv[0] / max(sv[-1], 1e-300):.2e})"
        )
    coef = coef_s / col_scale

    fit = M @ coef
    residuals = np.empty(len(radii))
    for i, sl in enumerate(slices):
        denom = float(np.linalg.norm(y[sl]))
        residuals[i] = float(np.linalg.norm(y[sl] - fit[sl])) / max(denom, 1e-300)
    classification = "SUCCESS" if np.all(residuals < success_tol) else "FAIL"
    return LiouvilleFit(
        coefficients=coef,
        radii=radii,
        residuals=residuals,
        classification=classification,
        basis=basis,
    )
