"""Ratio fields, discrete Hoelder scans, and solution-class sweeps.

The quotient of two solutions sharing a nodal set solves a degenerate
equation with weight u^2, and its interior Schauder regularity is
uniform over the solution class.  This module makes those statements
measurable: ``ratio`` builds the quotient with a degenerate fill on the
nodal collar, ``holder_seminorm`` runs exact pair scans for C^{0,alpha}
and C^{1,alpha} seminorms, ``boundary_conditions_check`` samples the
conormal defect along regular nodal curves, and ``uniformity_sweep``
tabulates normalized seminorms over a family of weights.

Seminorms are taken on interior balls directly; the localization cutoff
of the continuum argument is proof scaffolding with no discrete content.
Every grid function is Lipschitz, so only refinement stability (not an
a-priori/a-posteriori distinction) is observable; the sweeps record it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NodalInclusionViolated
from .fem import WeightSpec, assemble_weighted_stiffness, solve_degenerate
from .fields import field_gradients, field_values, identity_field
from .mesh import GridFunction, Mesh2D, disc_mesh
from .nodal import NodalDecomposition, extract_nodal_set

__all__ = [
    "HolderReport",
    "SweepTable",
    "ratio",
    "holder_seminorm",
    "c1_alpha_norm",
    "boundary_conditions_check",
    "uniformity_sweep",
]


# ---------------------------------------------------------------------------
# ratio
# ---------------------------------------------------------------------------


def _resolve_mesh(v, u, mesh, level):
    if mesh is not None:
        return mesh
    for f in (v, u):
        m = getattr(f, "mesh", None)
        if m is not None:
            return m
    return disc_mesh(level)


def ratio(v, u, fill: float = 1e-3, A=None, mesh: Mesh2D | None = None,
          level: int = 6, frequency_bound: float | None = None) -> GridFunction:
    """Quotient w = v/u with a degenerate fill across the nodal collar.

    Pointwise division is used where |u| > fill * sup|u|; the remaining
    vertices are filled by solving div(u^2 A grad w) = 0 with the divided
    values as Dirichlet data on the collar.  The quotient only exists
    when Z(u) is contained in Z(v), which is checked by sampling v on the
    nodal graph of u; NodalInclusionViolated reports the worst offender.
    """
    mesh = _resolve_mesh(v, u, mesh, level)
    A = A if A is not None else identity_field()
    uv = np.asarray(field_values(u, mesh.vertices), dtype=float)
    vv = np.asarray(field_values(v, mesh.vertices), dtype=float)
    uscale = float(np.max(np.abs(uv)))
    vscale = float(np.max(np.abs(vv)))
    if uscale == 0.0:
        raise ZeroDivisionError("u vanishes identically on the mesh")

    nd = extract_nodal_set(u, mesh, estimate_orders=False)
    if not nd.is_empty and vscale > 0.0:
        probe = np.abs(np.asarray(field_values(v, nd.node_points), dtype=float))
        worst = int(np.argmax(probe))
        tau = fill * vscale
        if probe[worst] > tau:
            raise NodalInclusionViolated(
                f"|v| = {probe[worst]:.3e} > {tau:.3e} at nodal point "
                f"{nd.node_points[worst]}; Z(u) is not contained in Z(v)"
            )

    known = np.abs(uv) > fill * uscale
    w = np.zeros(len(uv))
    w[known] = vv[known] / uv[known]
    if np.all(known):
        return GridFunction(mesh, w)

    if frequency_bound is None:
        try:
            frequency_bound = float(u.vanishing_order())
        except AttributeError:
            frequency_bound = 2.0
    spec = WeightSpec(u, 2.0, max(frequency_bound, 1.0))
    K, _ = assemble_weighted_stiffness(mesh, A, spec)
    from .fem import _solve_dirichlet

    fixed = np.flatnonzero(known)
    w = _solve_dirichlet(K, fixed, w[fixed])
    return GridFunction(mesh, w)


# ---------------------------------------------------------------------------
# Hoelder pair scans
# ---------------------------------------------------------------------------


@dataclass
class HolderReport:
    """Result of one discrete Hoelder scan."""

    alpha: float
    value: float
    pair: tuple
    min_separation: float
    component: int = -1  # index of the attaining partial; -1 for a value scan


def _pair_scan(pts: np.ndarray, vals: np.ndarray, alpha: float, min_sep: float):
    """Exact blockwise max of |f(x)-f(y)| / |x-y|^alpha over separated pairs.

    Deterministic max-reduction over row blocks; the full scan is O(n^2)
    but never materializes more than a block of the distance matrix.
    """
    n = len(pts)
    best, bi, bj = -1.0, 0, 0
    block = max(1, int(2_000_000 // max(n, 1)))
    for s in range(0, n, block):
        P = pts[s : s + block]
        D = np.sqrt(
            np.sum((P[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        )
        Q = np.abs(vals[s : s + block, None] - vals[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            Q = np.where(D >= min_sep, Q / D**alpha, -1.0)
        k = int(np.argmax(Q))
        i, j = divmod(k, n)
        if Q[i, j] > best:
            best, bi, bj = float(Q[i, j]), s + i, j
    return best, bi, bj


def holder_seminorm(
    f,
    alpha: float,
    min_sep: float,
    radius: float | None = None,
    on_gradient: bool = False,
    mesh: Mesh2D | None = None,
) -> HolderReport:
    """Discrete C^{0,alpha} seminorm of f, or of its recovered gradient.

    Scans all vertex pairs separated by at least min_sep (below that the
    quotient measures interpolation error, not the function), optionally
    restricted to the ball |x| <= radius.  With ``on_gradient`` the scan
    runs on each component of the area-weighted recovered gradient and
    reports the attaining partial, which is the C^{1,alpha} seminorm of f.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1] (got {alpha})")
    mesh = mesh if mesh is not None else getattr(f, "mesh", None)
    if mesh is None:
        raise ValueError("analytic input needs an explicit mesh")
    pts = mesh.vertices
    sel = np.ones(len(pts), dtype=bool)
    if radius is not None:
        sel = np.linalg.norm(pts, axis=1) <= radius + 1e-12
    pts = pts[sel]
    if on_gradient:
        if isinstance(f, GridFunction):
            grads = f.vertex_gradients()[sel]
        else:
            grads = np.asarray(field_gradients(f, pts), dtype=float)
        best = HolderReport(alpha, -1.0, (pts[0], pts[0]), min_sep)
        for c in range(2):
            v, i, j = _pair_scan(pts, grads[:, c], alpha, min_sep)
            if v > best.value:
                best = HolderReport(alpha, v, (pts[i], pts[j]), min_sep, c)
        return best
    if isinstance(f, GridFunction):
        vals = f.values[sel]
    else:
        vals = np.asarray(field_values(f, pts), dtype=float)
    v, i, j = _pair_scan(pts, vals, alpha, min_sep)
    return HolderReport(alpha, v, (pts[i], pts[j]), min_sep)


def c1_alpha_norm(
    f, alpha: float, min_sep: float, radius: float | None = None,
    mesh: Mesh2D | None = None,
) -> float:
    """Full C^{1,alpha} norm: sup|f| + sup|grad f| + gradient seminorm."""
    mesh = mesh if mesh is not None else getattr(f, "mesh", None)
    if mesh is None:
        raise ValueError("analytic input needs an explicit mesh")
    sel = np.ones(len(mesh.vertices), dtype=bool)
    if radius is not None:
        sel = np.linalg.norm(mesh.vertices, axis=1) <= radius + 1e-12
    if isinstance(f, GridFunction):
        vals = f.values[sel]
        grads = f.vertex_gradients()[sel]
    else:
        vals = np.asarray(field_values(f, mesh.vertices[sel]), dtype=float)
        grads = np.asarray(field_gradients(f, mesh.vertices[sel]), dtype=float)
    semi = holder_seminorm(f, alpha, min_sep, radius=radius,
                           on_gradient=True, mesh=mesh)
    return float(
        np.max(np.abs(vals))
        + np.max(np.linalg.norm(grads, axis=1))
        + semi.value
    )


# ---------------------------------------------------------------------------
# boundary conditions on the nodal set
# ---------------------------------------------------------------------------


def boundary_conditions_check(
    w, u, A=None, nd: NodalDecomposition | None = None,
    mesh: Mesh2D | None = None, interior: float | None = None,
):
    """Sampled conormal defect on the regular nodal set and |grad w| at
    singular points.

    Returns (max over regular nodal samples of |A grad w . grad u|
    normalized by |grad w||grad u|, list of |grad w| at each singular
    point).  Samples where either gradient falls below 1e-12 of its scale
    are skipped: the defect is a direction statement.

    The interface condition is an interior statement; where the nodal set
    meets the outer circle the Dirichlet datum overrides it in a boundary
    layer, so samples are kept to |x| <= interior (default 90% of the
    mesh radius).
    """
    A = A if A is not None else identity_field()
    mesh = mesh if mesh is not None else getattr(w, "mesh", None)
    if nd is None:
        if mesh is None:
            raise ValueError("need a nodal decomposition or a mesh")
        nd = extract_nodal_set(u, mesh, estimate_orders=False)
    if interior is None:
        interior = 0.9 * nd.mesh.radius
    defect = 0.0
    pts = nd.regular_points
    if len(pts):
        pts = pts[np.linalg.norm(pts, axis=1) <= interior]
    active = getattr(w, "active", None)
    if len(pts) and active is not None:
        # component solutions carry values only on their component; keep
        # the nodal samples bordering it (two active vertices nearby)
        t = nd.mesh.find_triangles(pts)
        ok = t >= 0
        ok[ok] = np.sum(active[nd.mesh.triangles[t[ok]]], axis=1) >= 2
        pts = pts[ok]
    if len(pts):
        gw = np.asarray(field_gradients(w, pts), dtype=float)
        gu = np.asarray(field_gradients(u, pts), dtype=float)
        Agw = np.einsum("nij,nj->ni", A.matrix(pts), gw)
        num = np.abs(np.sum(Agw * gu, axis=1))
        den = np.linalg.norm(gw, axis=1) * np.linalg.norm(gu, axis=1)
        scale = np.max(den) if len(den) else 0.0
        ok = den > 1e-12 * max(scale, 1e-300)
        if np.any(ok):
            defect = float(np.max(num[ok] / den[ok]))
    grad_at_singular = []
    for s in nd.singular_points:
        g = np.asarray(field_gradients(w, s.location[None, :]), dtype=float)
        grad_at_singular.append(float(np.linalg.norm(g[0])))
    return defect, grad_at_singular


# ---------------------------------------------------------------------------
# class-uniform sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepTable:
    """Normalized-seminorm ledger over a family of weights."""

    rows: list = field(default_factory=list)
    max_c0: float = 0.0
    max_c1: float = 0.0


def uniformity_sweep(
    entries,
    a: float,
    alpha: float,
    level: int = 6,
    A=None,
    radius: float = 0.5,
    min_sep: float | None = None,
) -> SweepTable:
    """Solve the weighted problem for each (label, u, g) and tabulate
    sup-normalized Hoelder seminorms on the interior ball.

    Each entry's solution is divided by its own sup norm before the
    scans, so the recorded values estimate the constants of the interior
    Schauder bound over the family.  C^{1,alpha} scans run only for
    a >= 0, matching the range where gradients of the solution are
    meaningful across the nodal set.
    """
    A = A if A is not None else identity_field()
    mesh = disc_mesh(level)
    sep = min_sep if min_sep is not None else 4.0 * mesh.h
    table = SweepTable()
    for label, u, g in entries:
        try:
            bound = float(u.vanishing_order())
        except AttributeError:
            bound = 2.0
        spec = WeightSpec(u, a, max(bound, 1.0))
        w = solve_degenerate(spec, A, g, mesh)
        sup = float(np.max(np.abs(w.values)))
        wn = GridFunction(mesh, w.values / max(sup, 1e-300))
        c0 = holder_seminorm(wn, alpha, sep, radius=radius)
        row = {
            "case": label,
            "a": a,
            "alpha": alpha,
            "sup": sup,
            "c0_seminorm": c0.value,
            "c1_seminorm": np.nan,
            "conormal_defect": np.nan,
            "grad_at_singular": np.nan,
        }
        if a >= 0.0:
            c1 = holder_seminorm(wn, alpha, sep, radius=radius, on_gradient=True)
            row["c1_seminorm"] = c1.value
        nd = extract_nodal_set(u, mesh, estimate_orders=False)
        if not nd.is_empty:
            defect, gs = boundary_conditions_check(wn, u, A, nd=nd)
            row["conormal_defect"] = defect
            if gs:
                row["grad_at_singular"] = max(gs)
        table.rows.append(row)
    c0s = [r["c0_seminorm"] for r in table.rows]
    c1s = [r["c1_seminorm"] for r in table.rows if np.isfinite(r["c1_seminorm"])]
    table.max_c0 = float(max(c0s)) if c0s else 0.0
    table.max_c1 = float(max(c1s)) if c1s else 0.0
    return table
