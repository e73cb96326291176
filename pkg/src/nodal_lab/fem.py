"""P1 finite elements for div(|u|^a A grad w) = 0.

The weight |u|^a vanishes (a > 0) or blows up (a < 0) on the nodal set
Z(u), so the quadrature is the sensitive part of the assembly:

* every element integral is a 7-point degree-5 rule;
* elements crossed by Z(u) are midpoint-subdivided once toward the zero
  line before applying the rule;
* for a < 0 the subdivision is graded: crossing children are refined
  recursively for 3 levels, so cells shrink geometrically toward Z(u);
* for a < 0 the finest cells touching Z(u) are additionally cut along
  the zero line of the cell-linearized u and the weight integrated in
  closed form on each one-signed piece (the 7-point rule has O(1)
  relative error against a power singularity, which would otherwise cap
  the convergence rate at h^(1+a));
* if the weighted element masses still concentrate pathologically (a
  single element carrying more than 1e6 times the mean, or a non-finite
  integral), the assembly refuses with `QuadratureBreakdown`.

Per-component accuracy note: the component boundary is the marching-
triangles zero polyline, an O(h^2) perturbation of Z(u) refined to leaf
scale inside crossed cells.  The natural (conormal) condition therefore
lives on a slightly wrong curve; on an axis-fitted mesh the same assembly
converges at slope 2 for every a > -1, while on unfitted meshes the
boundary crime costs a factor ~ (leaf size)^(1+a) for a < 0.

The half-plane operator div(|y|^a B grad w) is assembled from closed-form
element masses int_T y^a dA (the weight is affine on each triangle), which
removes all quadrature error from the one genuinely singular weight.

Dirichlet data is imposed by nodal interpolation; systems are solved with
a sparse direct factorization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ExponentBelowThreshold, QuadratureBreakdown, SingularSystem
from .fields import CoefficientField, field_values
from .mesh import GridFunction, Mesh2D
from .quadrature import TRI7_BARY, TRI7_W, split4, tri_areas, tri_points

BREAKDOWN_RATIO = 1e6


@dataclass
class WeightSpec:
    """Weight |u|^a together with the declared frequency bound of u.

    The admissible exponent range is a > -a_critical with
    a_critical = min(1, 2 / frequency_bound); `validate` enforces it.
    """

    u: object
    a: float
    frequency_bound: float = 1.0

    @property
    def a_critical(self) -> float:
        return min(1.0, 2.0 / self.frequency_bound)

    def validate(self):
        if self.a <= -self.a_critical:
            raise ExponentBelowThreshold(
                f"a = {self.a} at or below -a_S = {-self.a_critical} "
                f"(frequency bound {self.frequency_bound})"
            )

    def weight_values(self, points: np.ndarray, floor: float = 0.0) -> np.ndarray:
        """|u|^a at points; for a < 0 callers pass a relative floor on |u|
        so that values indistinguishable from zero at double precision do
        not produce arbitrarily large point weights."""
        mag = np.abs(field_values(self.u, points))
        if floor > 0.0:
            mag = np.maximum(mag, floor)
        return mag ** self.a

    def weight_floor(self, mesh) -> float:
        """Relative |u| floor for singular exponents on a given mesh."""
        if self.a >= 0:
            return 0.0
        scale = float(np.max(np.abs(field_values(self.u, mesh.vertices))))
        return 1e-9 * scale


def _dirichlet_values(g, points: np.ndarray) -> np.ndarray:
    if np.isscalar(g):
        return np.full(len(points), float(g))
    if hasattr(g, "values") or hasattr(g, "values_at"):
        return np.asarray(field_values(g, points), dtype=float)
    return np.asarray(g(points), dtype=float)


# ---------------------------------------------------------------------------
# weighted element integrals
# ---------------------------------------------------------------------------


def _crossing_mask(u, corners: np.ndarray, snap: float) -> np.ndarray:
    """Triangles whose closure meets {u = 0} (by vertex sign pattern)."""
    vals = field_values(u, corners.reshape(-1, 2)).reshape(corners.shape[0], 3)
    scale = np.max(np.abs(vals))
    if scale == 0.0:
        return np.ones(len(corners), dtype=bool)
    v = np.where(np.abs(vals) <= snap * scale, 0.0, vals)
    return (v.min(axis=1) <= 0.0) & (v.max(axis=1) >= 0.0)


def _cell_quad(corners: np.ndarray, fn) -> np.ndarray:
    """Apply the 7-point rule on each triangle: returns sums of shape
    ``(m,) + fn(...).shape[1:]`` where fn maps points ``(k, 2)`` to values."""
    pts = tri_points(corners)  # (m, 7, 2)
    flat = pts.reshape(-1, 2)
    vals = np.asarray(fn(flat))
    vals = vals.reshape(pts.shape[0], len(TRI7_W), *vals.shape[1:])
    areas = tri_areas(corners)
    w = TRI7_W.reshape(1, -1, *([1] * (vals.ndim - 2)))
    return areas.reshape(-1, *([1] * (vals.ndim - 2))) * np.sum(vals * w, axis=1)


def _split_signed_pieces(cells: np.ndarray, vals: np.ndarray):
    """Cut each triangle along the zero line of its vertex-linear values.

    ``vals`` must already have near-zero entries snapped to 0.  Returns
    (corners (p, 3, 2), heights (p, 3), parent (p,), sign (p,)) where each
    piece is one-signed with nonnegative heights |vals| (0 on the cut).
    """
    corners, heights, parent, signs = [], [], [], []
    for i, (cell, v) in enumerate(zip(cells, vals)):
        pos, neg = v > 0.0, v < 0.0
        if not (pos.any() and neg.any()):
            s = 1 if pos.any() else (-1 if neg.any() else 0)
            if s == 0:
                continue  # u vanishes on the whole cell: zero weight mass
            corners.append(cell)
            heights.append(np.abs(v))
            parent.append(i)
            signs.append(s)
            continue
        if np.any(v == 0.0):
            # one vertex on the line: cut from it to the opposite edge
            k0 = int(np.nonzero(v == 0.0)[0][0])
            ka, kb = (k0 + 1) % 3, (k0 + 2) % 3
            t = v[ka] / (v[ka] - v[kb])
            p = cell[ka] + t * (cell[kb] - cell[ka])
            for kk in (ka, kb):
                corners.append(np.array([cell[k0], cell[kk], p]))
                heights.append(np.array([0.0, abs(v[kk]), 0.0]))
                parent.append(i)
                signs.append(1 if v[kk] > 0 else -1)
            continue
        # lone vertex of isolated sign against the other two
        k0 = int(np.nonzero(pos)[0][0]) if pos.sum() == 1 else int(np.nonzero(neg)[0][0])
        ka, kb = (k0 + 1) % 3, (k0 + 2) % 3
        ta = v[k0] / (v[k0] - v[ka])
        tb = v[k0] / (v[k0] - v[kb])
        pa = cell[k0] + ta * (cell[ka] - cell[k0])
        pb = cell[k0] + tb * (cell[kb] - cell[k0])
        s0 = 1 if v[k0] > 0 else -1
        corners.append(np.array([cell[k0], pa, pb]))
        heights.append(np.array([abs(v[k0]), 0.0, 0.0]))
        parent.append(i)
        signs.append(s0)
        # the remaining quad, split along the (pa, cell[kb]) diagonal
        corners.append(np.array([pa, cell[ka], cell[kb]]))
        heights.append(np.array([0.0, abs(v[ka]), abs(v[kb])]))
        corners.append(np.array([pa, cell[kb], pb]))
        heights.append(np.array([0.0, abs(v[kb]), 0.0]))
        parent.extend([i, i])
        signs.extend([-s0, -s0])
    if not corners:
        empty = np.empty((0, 3, 2)), np.empty((0, 3)), np.empty(0, int), np.empty(0, int)
        return empty
    return (np.array(corners), np.array(heights),
            np.array(parent, dtype=int), np.array(signs, dtype=int))


def _exact_leaf_integrals(cells, u, a, smooth_fn, orig_tri, side, snap):
    """Leaf integrals int |u|^a * S dx with u linearized per cell.

    The cell is cut along the linearized zero line, the weight factor is
    integrated in closed form on each one-signed piece, and the smooth
    factor S (from ``smooth_fn(points, orig_tri)``) is frozen at the piece
    centroid.  This keeps the relative quadrature error of the singular
    weight O(h) instead of O(1) in the cells touching Z(u), which is what
    limits the convergence rate when a < 0.
    """
    vals = field_values(u, cells.reshape(-1, 2)).reshape(-1, 3)
    scale = np.max(np.abs(vals))
    if scale == 0.0:
        probe = np.asarray(smooth_fn(cells[:1].mean(axis=1), orig_tri[:1]))
        return np.zeros((len(cells),) + probe.shape[1:])
    v = np.where(np.abs(vals) <= snap * scale, 0.0, vals)
    corners, heights, parent, signs = _split_signed_pieces(cells, v)
    probe = np.asarray(smooth_fn(cells[:1].mean(axis=1), orig_tri[:1]))
    out = np.zeros((len(cells),) + probe.shape[1:])
    if side != 0:
        keep = signs == side
        corners, heights, parent = corners[keep], heights[keep], parent[keep]
    if len(corners) == 0:
        return out
    areas = tri_areas(corners)
    masses = _tri_mass_power(heights, areas, a)
    svals = np.asarray(smooth_fn(corners.mean(axis=1), orig_tri[parent]))
    np.add.at(out, parent, masses.reshape(-1, *([1] * (svals.ndim - 1))) * svals)
    return out


def weighted_cell_integrals(
    mesh: Mesh2D,
    fn,
    u=None,
    graded: bool = False,
    snap: float = 1e-9,
    tri_subset: np.ndarray | None = None,
    side: int = 0,
    exact_exponent: float | None = None,
    smooth_fn=None,
):
    """Per-triangle integrals of ``fn`` with subdivision toward Z(u).

    ``fn`` maps points to (possibly tensor-valued) integrands.  Triangles
    crossed by Z(u) are midpoint split once; with ``graded=True`` crossing
    children are split recursively for 3 levels.  With ``side`` set to +-1,
    subdivided cells whose centroid lies on the other side of {u = 0} are
    dropped, clipping the integral to one nodal component along the
    piecewise-linear zero line (used by the per-component solver, where
    the conormal condition lives on that line).

    With ``exact_exponent`` set (and ``smooth_fn(points, orig_tri)`` giving
    the smooth factor S in fn = |u|^a S), the finest cells touching Z(u)
    are integrated in closed form on one-signed pieces instead of by the
    7-point rule; required for accuracy when a < 0.
    """
    corners = mesh.vertices[mesh.triangles]
    if tri_subset is not None:
        active = np.zeros(len(corners), dtype=bool)
        active[tri_subset] = True
    else:
        active = np.ones(len(corners), dtype=bool)

    probe = np.asarray(fn(corners[0].mean(axis=0, keepdims=True)))
    out = np.zeros((len(corners),) + probe.shape[1:])
    idx = np.nonzero(active)[0]
    if len(idx) == 0:
        return out

    if u is None:
        out[idx] = _cell_quad(corners[idx], fn)
        return out

    def on_side(cells):
        if side == 0 or len(cells) == 0:
            return np.ones(len(cells), dtype=bool)
        cv = field_values(u, cells.mean(axis=1))
        return side * cv > 0

    crossing = _crossing_mask(u, corners[idx], snap)
    plain = idx[~crossing]
    if len(plain):
        out[plain] = _cell_quad(corners[plain], fn)
    crossed = idx[crossing]
    if len(crossed):
        levels = 3 if graded else 1
        parents = np.repeat(np.arange(len(crossed)), 4)
        cells = split4(corners[crossed])
        for _ in range(levels - 1):
            sub = _crossing_mask(u, cells, snap)
            keep_cells, keep_par = cells[~sub], parents[~sub]
            if np.any(sub):
                cells = split4(cells[sub])
                parents = np.repeat(parents[sub], 4)
            else:
                cells = np.empty((0, 3, 2))
                parents = np.empty(0, dtype=int)
            if len(keep_cells):
                ok = on_side(keep_cells)
                if np.any(ok):
                    vals = _cell_quad(keep_cells[ok], fn)
                    np.add.at(out, crossed[keep_par[ok]], vals)
        if len(cells):
            if exact_exponent is not None:
                vals = _exact_leaf_integrals(
                    cells, u, exact_exponent, smooth_fn, crossed[parents], side, snap
                )
                np.add.at(out, crossed[parents], vals)
            else:
                ok = on_side(cells)
                if np.any(ok):
                    vals = _cell_quad(cells[ok], fn)
                    np.add.at(out, crossed[parents[ok]], vals)
    return out


def _check_breakdown(masses: np.ndarray, where: np.ndarray | None = None):
    m = masses if where is None else masses[where]
    m = np.abs(m)
    if not np.all(np.isfinite(m)):
        raise QuadratureBreakdown("non-finite weighted element integral")
    mean = float(np.mean(m)) if len(m) else 0.0
    if mean > 0 and float(np.max(m)) > BREAKDOWN_RATIO * mean:
        raise QuadratureBreakdown(
            f"weighted element mass concentrates: max/mean = {np.max(m) / mean:.2e}"
        )


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def assemble_weighted_stiffness(
    mesh: Mesh2D,
    A: CoefficientField,
    spec: WeightSpec | None = None,
    tri_subset: np.ndarray | None = None,
    side: int = 0,
):
    """Sparse stiffness K_ij = int |u|^a grad phi_i . A grad phi_j dx.

    Returns ``(K, masses)`` where ``masses`` are the scalar weighted element
    masses used for the breakdown check and for residual normalization.
    """

    if spec is None:
        weight = lambda pts: np.ones(len(pts))
        u, graded, exact = None, False, None
    else:
        floor = spec.weight_floor(mesh)
        weight = lambda pts: spec.weight_values(pts, floor=floor)
        u, graded = spec.u, spec.a < 0
        exact = spec.a if spec.a < 0 else None

    def a_weighted(pts):
        return weight(pts)[:, None, None] * A(pts)

    M = weighted_cell_integrals(
        mesh, a_weighted, u=u, graded=graded, tri_subset=tri_subset, side=side,
        exact_exponent=exact, smooth_fn=lambda pts, t: A(pts),
    )
    masses = weighted_cell_integrals(
        mesh, weight, u=u, graded=graded, tri_subset=tri_subset, side=side,
        exact_exponent=exact, smooth_fn=lambda pts, t: np.ones(len(pts)),
    )
    if tri_subset is not None:
        _check_breakdown(masses, tri_subset)
    else:
        _check_breakdown(masses)

    g = mesh.barycentric_gradients  # (nt, 3, 2)
    kloc = np.einsum("tid,tde,tje->tij", g, M, g)
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    K = sp.coo_matrix(
        (kloc.ravel(), (rows, cols)), shape=(len(mesh.vertices),) * 2
    ).tocsr()
    return K, masses


def lumped_weighted_mass(
    mesh: Mesh2D, spec: WeightSpec | None, tri_subset: np.ndarray | None = None, side: int = 0
) -> np.ndarray:
    """Vertex vector m_i = int |u|^a phi_i dx, lumped per element."""
    if spec is None:
        weight, u, graded, exact = (lambda pts: np.ones(len(pts))), None, False, None
    else:
        floor = spec.weight_floor(mesh)
        weight = lambda pts: spec.weight_values(pts, floor=floor)
        u, graded = spec.u, spec.a < 0
        exact = spec.a if spec.a < 0 else None
    masses = weighted_cell_integrals(
        mesh, weight, u=u, graded=graded, tri_subset=tri_subset, side=side,
        exact_exponent=exact, smooth_fn=lambda pts, t: np.ones(len(pts)),
    )
    out = np.zeros(len(mesh.vertices))
    np.add.at(out, mesh.triangles.ravel(), np.repeat(masses / 3.0, 3))
    return out


def vector_load(mesh: Mesh2D, F, tri_subset: np.ndarray | None = None) -> np.ndarray:
    """Load vector b_i = -int F . grad phi_i dx for a vector field F."""
    cell = weighted_cell_integrals(mesh, F, tri_subset=tri_subset)  # (nt, 2)
    g = mesh.barycentric_gradients
    bloc = -np.einsum("tid,td->ti", g, cell)
    out = np.zeros(len(mesh.vertices))
    np.add.at(out, mesh.triangles.ravel(), bloc.ravel())
    return out


def _solve_dirichlet(K, fixed: np.ndarray, fixed_vals: np.ndarray, b: np.ndarray | None = None):
    nv = K.shape[0]
    mask = np.zeros(nv, dtype=bool)
    mask[fixed] = True
    free = np.nonzero(~mask)[0]
    if len(free) == 0:
        raise SingularSystem("no interior unknowns after boundary elimination")
    x = np.zeros(nv)
    x[fixed] = fixed_vals
    rhs = (b[free] if b is not None else 0.0) - K[free][:, fixed] @ fixed_vals
    Kff = K[free][:, free].tocsc()
    if len(free) > 200_000:
        # weighted systems are ill-conditioned near Z(u): scale by the
        # diagonal so CG tolerances mean the same thing at every exponent
        d = Kff.diagonal()
        d = np.where(d > 0, d, 1.0) ** -0.5
        D = sp.diags(d)
        sol, info = spla.cg(D @ Kff @ D, d * rhs, rtol=1e-12, maxiter=10_000)
        if info != 0:
            raise SingularSystem(f"conjugate gradients stalled (info={info})")
        sol = d * sol
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                sol = spla.spsolve(Kff, rhs)
            except (spla.MatrixRankWarning, RuntimeError) as exc:
                raise SingularSystem(f"sparse solve failed: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("sparse solve produced non-finite values")
    scale = max(
        float(np.linalg.norm(rhs)),
        float(abs(Kff).sum(axis=1).max() * np.max(np.abs(sol), initial=0.0)),
        1e-300,
    )
    if np.linalg.norm(Kff @ sol - rhs) > 1e-8 * scale:
        raise SingularSystem("sparse solve residual too large (singular system?)")
    x[free] = sol
    return x


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def solve_elliptic(A: CoefficientField, g, mesh: Mesh2D, b: np.ndarray | None = None) -> GridFunction:
    """Solve div(A grad w) = 0 with Dirichlet data g on the outer boundary.

    An optional pre-assembled load vector ``b`` turns this into the
    inhomogeneous solve used by the corrector construction.
    """
    K, _ = assemble_weighted_stiffness(mesh, A)
    fixed = mesh.markers["outer"]
    vals = _solve_dirichlet(K, fixed, _dirichlet_values(g, mesh.vertices[fixed]), b)
    return GridFunction(mesh, vals)


def solve_degenerate(
    spec: WeightSpec,
    A: CoefficientField,
    g,
    mesh: Mesh2D,
    mode: str = "whole-ball",
    seed=None,
) -> GridFunction:
    """Solve div(|u|^a A grad w) = 0 with Dirichlet data on the outer circle.

    ``mode="whole-ball"`` assembles across Z(u) and requires a >= 1 (the
    energy space does not see the nodal set there).  ``mode="component"``
    restricts to the connected component of {u != 0} containing ``seed``;
    the nodal boundary carries the natural (conormal) condition, the outer
    boundary piece keeps g.
    """
    spec.validate()
    if mode == "whole-ball":
        if spec.a < 0.0:
            raise ExponentBelowThreshold(
                f"whole-ball mode needs a >= 0 (got a = {spec.a}); use component mode"
            )
        K, _ = assemble_weighted_stiffness(mesh, A, spec)
        fixed = mesh.markers["outer"]
        vals = _solve_dirichlet(K, fixed, _dirichlet_values(g, mesh.vertices[fixed]))
        return GridFunction(mesh, vals)
    if mode != "component":
        raise ValueError(f"unknown mode {mode!r}")
    if seed is None:
        raise ValueError("component mode needs a seed point")
    from .nodal import component_triangles

    tris = component_triangles(spec.u, mesh, seed)
    side = _component_sign(spec.u, mesh, np.asarray(seed, dtype=float))
    K, _ = assemble_weighted_stiffness(mesh, A, spec, tri_subset=tris, side=side)
    incident = np.unique(mesh.triangles[tris])
    active = np.zeros(len(mesh.vertices), dtype=bool)
    active[incident] = True
    outer = mesh.markers["outer"]
    fixed = outer[active[outer]]
    inactive = np.nonzero(~active)[0]
    fixed_all = np.concatenate([fixed, inactive])
    fixed_vals = np.concatenate(
        [_dirichlet_values(g, mesh.vertices[fixed]), np.zeros(len(inactive))]
    )
    vals = _solve_dirichlet(K, fixed_all, fixed_vals)
    out = GridFunction(mesh, vals, active=active)
    out.subset = tris
    out.side = side
    return out


def _component_sign(u, mesh: Mesh2D, seed: np.ndarray) -> int:
    """Sign of u on the nodal component containing the seed point."""
    sval = float(field_values(u, seed[None])[0])
    scale = float(np.max(np.abs(field_values(u, mesh.vertices))))
    if abs(sval) <= 1e-9 * scale:
        t = int(mesh.find_triangles(seed)[0])
        if t < 0:
            raise ValueError(f"seed point {seed} lies outside the mesh")
        sval = float(np.mean(field_values(u, mesh.vertices[mesh.triangles[t]])))
    return 1 if sval >= 0 else -1


# ---------------------------------------------------------------------------
# the half-plane operator with exact element masses
# ---------------------------------------------------------------------------


def _tri_mass_power(y: np.ndarray, areas: np.ndarray, a: float) -> np.ndarray:
    """Exact ``int_T y^a dA`` per triangle from the vertex heights ``y (m, 3)``.

    Heights must be nonnegative and a > -1.  Uses the closed form with three
    branches (distinct / one pair merged / all merged) switched on the
    relative separation to keep the cancellation error near 1e-10.
    """
    y = np.sort(np.asarray(y, dtype=float), axis=1)
    ymax = np.maximum(y[:, 2], 1e-300)
    sep = 1e-3
    d21 = (y[:, 1] - y[:, 0]) / ymax
    d32 = (y[:, 2] - y[:, 1]) / ymax
    out = np.empty(len(y))
    c1 = (a + 1.0) * (a + 2.0)

    def pw(base, e):
        # 0^e with e > 0 must be 0 even when floating noise makes base tiny-negative
        return np.where(base <= 0.0, 0.0, base) ** e

    all_close = (d21 < sep) & (d32 < sep)
    pair_low = (d21 < sep) & ~all_close   # y0 ~ y1 < y2
    pair_high = (d32 < sep) & ~all_close  # y0 < y1 ~ y2
    generic = ~(all_close | pair_low | pair_high)

    if np.any(all_close):
        m = all_close
        out[m] = areas[m] * pw(y[m].mean(axis=1), a)

    def merged(p, q, area):
        # int over triangle with two heights p and one height q
        dq = q - p
        val = pw(q, a + 2.0) - pw(p, a + 2.0) - (a + 2.0) * pw(p, a + 1.0) * dq
        return 2.0 * area * val / (c1 * dq ** 2)

    if np.any(pair_low):
        m = pair_low
        p = 0.5 * (y[m, 0] + y[m, 1])
        out[m] = merged(p, y[m, 2], areas[m])
    if np.any(pair_high):
        m = pair_high
        q = 0.5 * (y[m, 1] + y[m, 2])
        out[m] = merged(q, y[m, 0], areas[m])
    if np.any(generic):
        m = generic
        y0, y1, y2 = y[m, 0], y[m, 1], y[m, 2]
        t0 = pw(y0, a + 2.0) / ((y0 - y1) * (y0 - y2))
        t1 = pw(y1, a + 2.0) / ((y1 - y0) * (y1 - y2))
        t2 = pw(y2, a + 2.0) / ((y2 - y0) * (y2 - y1))
        out[m] = 2.0 * areas[m] * (t0 + t1 + t2) / c1
    return out


def halfplane_cell_masses(mesh: Mesh2D, a: float) -> np.ndarray:
    y = mesh.vertices[mesh.triangles][:, :, 1]
    if np.any(y < -1e-12 * mesh.radius):
        raise ValueError("half-plane masses need a mesh contained in {y >= 0}")
    return _tri_mass_power(np.clip(y, 0.0, None), mesh.areas, a)


def solve_halfplane_la(a: float, g, mesh: Mesh2D, B: np.ndarray | None = None) -> GridFunction:
    """Solve div(|y|^a B grad w) = 0 on the upper half disc.

    Dirichlet data g on the circular arc, natural condition
    |y|^a B grad w . e_2 = 0 along y = 0.  B is a constant SPD matrix
    (default identity).  Requires a > -1; the element masses int_T y^a dA
    are closed-form, so the singular weight carries no quadrature error.
    """
    if a <= -1.0:
        raise ExponentBelowThreshold(f"half-plane operator needs a > -1 (got {a})")
    if "symmetry" not in mesh.markers:
        raise ValueError("mesh has no symmetry marker; use half_disc_mesh")
    B = np.eye(2) if B is None else np.asarray(B, dtype=float)
    masses = halfplane_cell_masses(mesh, a)
    _check_breakdown(masses)
    gb = mesh.barycentric_gradients
    kloc = np.einsum("t,tid,de,tje->tij", masses, gb, B, gb)
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    K = sp.coo_matrix((kloc.ravel(), (rows, cols)), shape=(len(mesh.vertices),) * 2).tocsr()
    fixed = mesh.markers["outer"]
    vals = _solve_dirichlet(K, fixed, _dirichlet_values(g, mesh.vertices[fixed]))
    return GridFunction(mesh, vals)


# ---------------------------------------------------------------------------
# residuals and errors
# ---------------------------------------------------------------------------


def weak_residual(
    w: GridFunction,
    spec: WeightSpec | None,
    A: CoefficientField,
    free: np.ndarray | None = None,
    halfplane_a: float | None = None,
    B: np.ndarray | None = None,
) -> float:
    """Energy-dual norm of the weak-form residual, relative to the field size.

    With r_i = int |u|^a A grad w . grad phi_i over the free (interior,
    active) hats, returns sqrt(r^T K_ff^{-1} r) / max(|w|_E, |w|_inf),
    i.e. the largest relative residual against any discrete test field of
    unit energy.  This equals the energy distance from w to the discrete
    solution sharing its boundary values, so Galerkin outputs return
    solver roundoff (below 1e-8), interpolants of true solutions decay
    O(h) under refinement (Cea), and non-solutions stay bounded away from
    zero (their energy distance to solution-hood is a fixed positive
    number).  Per-hat normalizations cannot do all three at once: mass
    density is O(1) for interpolants near any mesh asymmetry, while
    per-hat energy lets non-solutions decay.

    ``free`` overrides the row set (hat indices to test against).
    """
    mesh = w.mesh
    if halfplane_a is not None:
        masses = halfplane_cell_masses(mesh, halfplane_a)
        Bm = np.eye(2) if B is None else np.asarray(B, dtype=float)
        gb = mesh.barycentric_gradients
        kloc = np.einsum("t,tid,de,tje->tij", masses, gb, Bm, gb)
        tri = mesh.triangles
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        K = sp.coo_matrix((kloc.ravel(), (rows, cols)), shape=(len(mesh.vertices),) * 2).tocsr()
    else:
        subset = getattr(w, "subset", None)
        side = getattr(w, "side", 0)
        K, _ = assemble_weighted_stiffness(mesh, A, spec, tri_subset=subset, side=side)
    r = K @ w.values
    if free is None:
        mask = np.ones(len(mesh.vertices), dtype=bool)
        mask[mesh.markers["outer"]] = False
        if w.active is not None:
            mask &= w.active
        free = np.nonzero(mask)[0]
    if len(free) == 0:
        return 0.0
    Kff = K[free][:, free].tocsc()
    z = spla.spsolve(Kff, r[free])
    num = float(np.sqrt(max(float(r[free] @ z), 0.0)))
    energy = float(np.sqrt(max(float(w.values @ (K @ w.values)), 0.0)))
    denom = max(energy, float(np.max(np.abs(w.values))), 1e-300)
    return num / denom


def fe_l2_error(w: GridFunction, exact, relative: bool = True, tris: np.ndarray | None = None) -> float:
    """L2 distance between a P1 field and an exact field over the mesh."""
    mesh = w.mesh
    corners = mesh.vertices[mesh.triangles]
    pts = tri_points(corners).reshape(-1, 2)
    wh = np.einsum("qk,tk->tq", TRI7_BARY, w.values[mesh.triangles]).ravel()
    ex = _dirichlet_values(exact, pts)
    diff2 = (wh - ex) ** 2
    ex2 = ex ** 2
    areas = mesh.areas
    sel = np.ones(len(mesh.triangles), dtype=bool) if tris is None else np.zeros(len(mesh.triangles), dtype=bool)
    if tris is not None:
        sel[tris] = True
    diff2 = diff2.reshape(len(mesh.triangles), -1)[sel]
    ex2 = ex2.reshape(len(mesh.triangles), -1)[sel]
    areas = areas[sel]
    num = float(np.sum(areas * np.sum(diff2 * TRI7_W, axis=1)))
    if not relative:
        return float(np.sqrt(num))
    den = float(np.sum(areas * np.sum(ex2 * TRI7_W, axis=1)))
    return float(np.sqrt(num / max(den, 1e-300)))
