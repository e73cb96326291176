"""Nodal set extraction and the hooking / xi diagnostics.

The zero set Z(u) of a P1 field is a union of straight segments, one per
triangle crossed by the sign change, with endpoints on edges (or at mesh
vertices where u vanishes exactly).  This module builds those segments by
marching the triangles, chains them into polylines, labels the connected
components of {u != 0} by flood fill, and classifies nodal points into the
regular part (|grad u| above threshold) and isolated singular points.

Thresholds: a vertex value counts as zero when |u| <= tau_val * max|u|;
a nodal point is regular when |grad u| > tau_grad * max|grad u|.  The
defaults (1e-9, 1e-4) separate exact polynomial zeros from roundoff at
double precision.

Singular-point locations of polynomial inputs are refined to the exact
roots of the complex derivative; their vanishing orders come from the
frequency limit, not from branch counting (the branch count 2N is then an
invariant to check, not an input).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateField,
    NoConvergence,
    NoNodalIntersection,
    OrderMismatch,
    RadiusOutOfDomain,
    ZeroHeight,
)
from .fields import HarmonicPolynomial2D, field_gradients, field_values, identity_field
from .mesh import Mesh2D

TAU_VAL = 1e-9
TAU_GRAD = 1e-4


# ---------------------------------------------------------------------------
# vertex snapping and component labels
# ---------------------------------------------------------------------------


def _snapped_vertex_values(u, mesh: Mesh2D, tau_val: float) -> np.ndarray:
    vals = np.asarray(field_values(u, mesh.vertices), dtype=float)
    scale = float(np.max(np.abs(vals)))
    if scale == 0.0:
        raise DegenerateField("field vanishes at every mesh vertex")
    return np.where(np.abs(vals) <= tau_val * scale, 0.0, vals)


def _region_components(u, mesh: Mesh2D, tau_val: float):
    """Flood fill over triangle sign regions.

    A triangle crossed by Z(u) carries two regions (its positive and its
    negative part); an uncrossed triangle carries one.  A shared edge
    passes a sign wherever the linear trace of u on the edge attains it,
    so straddling triangles do not leak components across the nodal line.
    Returns (component id per region (2*nt,), exists mask, n_components,
    snapped vertex values).
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    vals = _snapped_vertex_values(u, mesh, tau_val)
    tri = mesh.triangles
    nt = len(tri)
    v = vals[tri]
    exists = np.concatenate([(v > 0).any(axis=1), (v < 0).any(axis=1)])

    nbr = mesh.triangle_neighbors
    rows, cols = [], []
    for j in range(3):
        n = nbr[:, j]
        t = np.arange(nt)
        sel = n > t  # each shared edge once
        va = vals[tri[sel, j]]
        vb = vals[tri[sel, (j + 1) % 3]]
        tp, nb = t[sel], n[sel]
        plus = np.maximum(va, vb) > 0
        minus = np.minimum(va, vb) < 0
        rows.extend([tp[plus], tp[minus] + nt])
        cols.extend([nb[plus], nb[minus] + nt])
    rows = np.concatenate(rows) if rows else np.empty(0, dtype=int)
    cols = np.concatenate(cols) if cols else np.empty(0, dtype=int)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(2 * nt, 2 * nt))
    _, raw = connected_components(graph, directed=False)
    raw = np.where(exists, raw, -1)
    comp_ids = np.unique(raw[exists])
    remap = {c: i for i, c in enumerate(comp_ids)}
    comps = np.array([remap.get(c, -1) for c in raw])
    return comps, exists, len(comp_ids), vals


def component_labels(u, mesh: Mesh2D, tau_val: float = TAU_VAL) -> np.ndarray:
    """Connected components of {u != 0}: one integer label per triangle.

    Triangles crossed by the nodal line are assigned the component of the
    side holding their centroid (the positive side on an exact tie);
    fully degenerate triangles get -1.
    """
    comps, exists, _, vals = _region_components(u, mesh, tau_val)
    nt = len(mesh.triangles)
    mean = vals[mesh.triangles].mean(axis=1)
    pick_pos = (mean > 0) | ((mean == 0) & exists[:nt])
    return np.where(pick_pos, comps[:nt], comps[nt:])


def component_triangles(u, mesh: Mesh2D, seed) -> np.ndarray:
    """Triangles meeting the nodal component of {u != 0} containing ``seed``.

    Includes the crossed triangles along the component boundary, so the
    returned set covers the component closure (what the conormal-condition
    assembly needs).
    """
    seed = np.asarray(seed, dtype=float)
    t = int(mesh.find_triangles(seed)[0])
    if t < 0:
        raise ValueError(f"seed point {seed} lies outside the mesh")
    comps, exists, _, vals = _region_components(u, mesh, TAU_VAL)
    nt = len(mesh.triangles)
    sval = float(field_values(u, seed[None])[0])
    scale = float(np.max(np.abs(vals)))
    if abs(sval) <= TAU_VAL * scale:
        sval = float(vals[mesh.triangles[t]].mean())
    region = t if sval >= 0 else nt + t
    if not exists[region]:
        region = nt + t if region == t else t
    c = comps[region]
    return np.nonzero((comps[:nt] == c) | (comps[nt:] == c))[0]


# ---------------------------------------------------------------------------
# marching triangles
# ---------------------------------------------------------------------------


def _nodal_graph(u, mesh: Mesh2D, tau_val: float):
    """Zero-crossing graph: node points keyed by vertex or edge, segment
    soup as pairs of node keys.  Zero edges are deduplicated."""
    vals = _snapped_vertex_values(u, mesh, tau_val)
    tri = mesh.triangles
    verts = mesh.vertices
    nodes: dict[tuple, np.ndarray] = {}
    segments: set[tuple] = set()

    def vertex_node(i):
        key = ("v", int(i))
        nodes.setdefault(key, verts[i])
        return key

    def edge_node(a, b):
        a, b = (a, b) if a < b else (b, a)
        key = ("e", int(a), int(b))
        if key not in nodes:
            t = vals[a] / (vals[a] - vals[b])
            nodes[key] = verts[a] + t * (verts[b] - verts[a])
        return key

    for t in range(len(tri)):
        iv = tri[t]
        v = vals[iv]
        zero_keys = [vertex_node(iv[j]) for j in range(3) if v[j] == 0.0]
        for j in range(3):
            a, b = iv[j], iv[(j + 1) % 3]
            if vals[a] * vals[b] < 0.0:
                zero_keys.append(edge_node(a, b))
        if len(zero_keys) == 2:
            k1, k2 = sorted(zero_keys)
            if k1 != k2:
                segments.add((k1, k2))
        # 3 zero vertices would mean a fully degenerate triangle: skipped

    return nodes, sorted(segments)


def _chain_polylines(nodes, segments):
    """Chain the segment soup into polylines, breaking at junctions."""
    adj: dict[tuple, list[tuple]] = {k: [] for k in nodes}
    for a, b in segments:
        adj[a].append(b)
        adj[b].append(a)
    degree = {k: len(v) for k, v in adj.items()}
    unused = set(segments)

    def seg_key(a, b):
        return (a, b) if (a, b) in unused else (b, a)

    polylines = []
    starts = [k for k in nodes if degree[k] != 2 and degree[k] > 0]
    for start in starts:
        for nxt in adj[start]:
            if seg_key(start, nxt) not in unused:
                continue
            path = [start, nxt]
            unused.discard(seg_key(start, nxt))
            while degree[path[-1]] == 2:
                a = path[-1]
                ext = [b for b in adj[a] if seg_key(a, b) in unused]
                if not ext:
                    break
                path.append(ext[0])
                unused.discard(seg_key(a, ext[0]))
            polylines.append(path)
    while unused:  # closed loops: every remaining node has degree 2
        a, b = next(iter(unused))
        path = [a, b]
        unused.discard((a, b))
        while True:
            tail = path[-1]
            ext = [c for c in adj[tail] if seg_key(tail, c) in unused]
            if not ext:
                break
            unused.discard(seg_key(tail, ext[0]))
            path.append(ext[0])
        polylines.append(path)
    return polylines, degree


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------


@dataclass
class SingularPoint:
    location: np.ndarray
    order: float
    branches: int


@dataclass
class NodalDecomposition:
    """Z(u) on a mesh: segments, chained polylines, point classification,
    and per-triangle component labels of {u != 0}."""

    mesh: Mesh2D
    segments: np.ndarray            # (m, 2, 2)
    polylines: list
    node_points: np.ndarray         # (p, 2) all nodal graph nodes
    node_degrees: np.ndarray        # (p,)
    regular_points: np.ndarray      # subset of node_points
    singular_points: list
    labels: np.ndarray              # (nt,)
    n_components: int
    tau_val: float
    tau_grad: float
    gradient_scale: float = field(default=0.0, repr=False)

    @property
    def is_empty(self) -> bool:
        return len(self.segments) == 0


def _refine_singular(u, p: np.ndarray, h: float) -> np.ndarray:
    """Snap a singular-point candidate of a polynomial to a root of f'."""
    if not isinstance(u, HarmonicPolynomial2D):
        return p
    dc = np.polynomial.polynomial.polyder(u.coeffs)
    if len(dc) < 2:
        return p
    roots = np.polynomial.polynomial.polyroots(dc)
    z = complex(p[0], p[1])
    k = int(np.argmin(np.abs(roots - z)))
    if abs(roots[k] - z) <= 2 * h:
        return np.array([roots[k].real, roots[k].imag])
    return p


def extract_nodal_set(
    u,
    mesh: Mesh2D,
    tau_val: float = TAU_VAL,
    tau_grad: float = TAU_GRAD,
    A=None,
    estimate_orders: bool = True,
) -> NodalDecomposition:
    """Extract Z(u) on the mesh and classify its points.

    Singular points are local minima of |grad u| along the nodal graph
    below the gradient threshold; their locations are refined to roots of
    the complex derivative for polynomial inputs and their orders estimated
    by the frequency limit (nan when the ladder cannot settle).
    """
    nodes, seg_keys = _nodal_graph(u, mesh, tau_val)
    comps, exists, n_components, vals = _region_components(u, mesh, tau_val)
    nt = len(mesh.triangles)
    mean = vals[mesh.triangles].mean(axis=1)
    pick_pos = (mean > 0) | ((mean == 0) & exists[:nt])
    labels = np.where(pick_pos, comps[:nt], comps[nt:])

    keys = sorted(nodes)
    index = {k: i for i, k in enumerate(keys)}
    pts = np.array([nodes[k] for k in keys]).reshape(-1, 2)
    segments = np.array(
        [[nodes[a], nodes[b]] for a, b in seg_keys], dtype=float
    ).reshape(-1, 2, 2)
    polyline_keys, degree = _chain_polylines(nodes, seg_keys)
    polylines = [np.array([nodes[k] for k in path]) for path in polyline_keys]
    degrees = np.array([degree.get(k, 0) for k in keys], dtype=int)

    gmesh = np.linalg.norm(np.asarray(field_gradients(u, mesh.vertices)), axis=1)
    gscale = float(np.max(gmesh))
    if len(pts):
        gnode = np.linalg.norm(np.asarray(field_gradients(u, pts)), axis=1)
        regular_mask = gnode > tau_grad * gscale
    else:
        gnode = np.empty(0)
        regular_mask = np.empty(0, dtype=bool)

    # adjacency over node indices for the local-minimum test
    adj = [[] for _ in keys]
    for a, b in seg_keys:
        ia, ib = index[a], index[b]
        adj[ia].append(ib)
        adj[ib].append(ia)

    singular = []
    if A is None:
        A = identity_field()
    for i, k in enumerate(keys):
        if regular_mask[i] or degrees[i] == 0:
            continue
        if any(gnode[j] < gnode[i] for j in adj[i]):
            continue  # not a local minimum of |grad u| on the graph
        loc = _refine_singular(u, pts[i], mesh.h)
        order = float("nan")
        if estimate_orders:
            r_cap = 0.9 * (mesh.radius - float(np.linalg.norm(loc - mesh.center)))
            r_start = min(0.25, r_cap)
            if r_start > 0:
                try:
                    kw = {}
                    if not isinstance(u, HarmonicPolynomial2D):
                        kw = {"r_min": 2.0 * mesh.h, "tol": 5e-2}
                    from .frequency import vanishing_order

                    order = vanishing_order(u, A, loc, r_start=r_start, **kw)
                except (NoConvergence, RadiusOutOfDomain, ZeroHeight):
                    order = float("nan")
        singular.append(SingularPoint(loc, order, int(degrees[i])))

    return NodalDecomposition(
        mesh=mesh,
        segments=segments,
        polylines=polylines,
        node_points=pts,
        node_degrees=degrees,
        regular_points=pts[regular_mask] if len(pts) else pts,
        singular_points=singular,
        labels=labels,
        n_components=n_components,
        tau_val=tau_val,
        tau_grad=tau_grad,
        gradient_scale=gscale,
    )


# ---------------------------------------------------------------------------
# distance
# ---------------------------------------------------------------------------


def dist_to_nodal(nd: NodalDecomposition, points) -> np.ndarray | float:
    """Euclidean distance from points to the nearest nodal segment."""
    if nd.is_empty:
        raise DegenerateField("nodal set is empty")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = nd.segments[:, 0]
    d = nd.segments[:, 1] - a
    dd = np.einsum("md,md->m", d, d)
    dd = np.where(dd == 0.0, 1.0, dd)
    best = np.full(len(pts), np.inf)
    step = max(1, int(2e6 // max(len(nd.segments), 1)))
    for lo in range(0, len(pts), step):
        P = pts[lo : lo + step]
        t = np.einsum("nd,md->nm", P, d) - np.einsum("md,md->m", a, d)
        t = np.clip(t / dd, 0.0, 1.0)
        proj = a[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = np.linalg.norm(P[:, None, :] - proj, axis=2)
        best[lo : lo + step] = dist.min(axis=1)
    if np.isscalar(points[0]) and np.ndim(points) == 1:
        return float(best[0])
    return best


# ---------------------------------------------------------------------------
# hooking diagnostic
# ---------------------------------------------------------------------------


class HookResult(NamedTuple):
    """Best gradient-angle hook found on the nodal set around a base point."""

    base: np.ndarray
    point: np.ndarray
    angle: float
    radius: float


def _circle_segment_hits(segments: np.ndarray, center: np.ndarray, R: float) -> np.ndarray:
    """Intersection points of the circle |x - center| = R with the segments."""
    a = segments[:, 0] - center
    d = segments[:, 1] - segments[:, 0]
    A2 = np.einsum("md,md->m", d, d)
    B2 = 2.0 * np.einsum("md,md->m", a, d)
    C2 = np.einsum("md,md->m", a, a) - R ** 2
    disc = B2 ** 2 - 4.0 * A2 * C2
    hits = []
    ok = (disc >= 0) & (A2 > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    for sgn in (-1.0, 1.0):
        t = (-B2 + sgn * sq) / (2.0 * np.where(A2 > 0, A2, 1.0))
        sel = ok & (t >= 0.0) & (t <= 1.0)
        if np.any(sel):
            hits.append(segments[sel, 0] + t[sel, None] * (segments[sel, 1] - segments[sel, 0]))
    if not hits:
        return np.empty((0, 2))
    return np.unique(np.round(np.vstack(hits), 13), axis=0)


def _refine_on_circle(u, center: np.ndarray, R: float, q: np.ndarray) -> np.ndarray:
    """Newton along the circle for polynomial u: solve u(q(phi)) = 0."""
    phi = float(np.arctan2(q[1] - center[1], q[0] - center[0]))
    for _ in range(30):
        p = center + R * np.array([np.cos(phi), np.sin(phi)])
        val = float(u.values(p))
        g = np.asarray(u.gradients(p))
        dval = float(g @ (R * np.array([-np.sin(phi), np.cos(phi)])))
        if dval == 0.0:
            break
        step = val / dval
        phi -= step
        if abs(step) < 1e-15:
            break
    return center + R * np.array([np.cos(phi), np.sin(phi)])


def find_hook(
    u,
    x0,
    r_range,
    mesh: Mesh2D | None = None,
    n_radii: int = 24,
    tau_grad: float = TAU_GRAD,
) -> HookResult:
    """Search circles around a regular nodal point for the nodal point with
    the largest unsigned gradient angle against grad u(x0).

    ``r_range`` is (r_min, r_max) or an explicit radius sequence; the angle
    between grad u(x0) and +-grad u(q) lies in [0, pi/2].  Raises
    `NoNodalIntersection` when no sampled circle meets Z(u).
    """
    x0 = np.asarray(x0, dtype=float)
    if mesh is None:
        from .mesh import disc_mesh

        mesh = disc_mesh(5)
    nd = extract_nodal_set(u, mesh, tau_grad=tau_grad, estimate_orders=False)
    if nd.is_empty:
        raise NoNodalIntersection("the field has no zero crossings on the mesh")
    if float(dist_to_nodal(nd, x0[None])[0]) > 2.0 * mesh.h:
        raise ValueError(f"base point {x0} is not on the nodal set")
    g0 = np.asarray(field_gradients(u, x0[None]))[0]
    n0 = np.linalg.norm(g0)
    if n0 <= tau_grad * nd.gradient_scale:
        raise ValueError(f"base point {x0} is not a regular nodal point")

    radii = np.asarray(r_range, dtype=float)
    if radii.shape == (2,) and n_radii > 2:
        radii = np.linspace(radii[0], radii[1], n_radii)
    best = None
    analytic = isinstance(u, HarmonicPolynomial2D)
    for R in radii:
        qs = _circle_segment_hits(nd.segments, x0, float(R))
        if len(qs) == 0:
            continue
        if analytic:
            qs = np.array([_refine_on_circle(u, x0, float(R), q) for q in qs])
        gq = np.asarray(field_gradients(u, qs))
        nq = np.linalg.norm(gq, axis=1)
        sel = nq > tau_grad * nd.gradient_scale
        if not np.any(sel):
            continue
        cosang = np.abs(gq[sel] @ g0) / (nq[sel] * n0)
        ang = np.arccos(np.clip(cosang, -1.0, 1.0))
        k = int(np.argmax(ang))
        if best is None or ang[k] > best.angle:
            best = HookResult(x0, qs[sel][k], float(ang[k]), float(R))
    if best is None:
        raise NoNodalIntersection(
            f"no circle around {x0} with radius in [{radii.min()}, {radii.max()}] meets Z(u)"
        )
    return best


# ---------------------------------------------------------------------------
# xi diagnostic
# ---------------------------------------------------------------------------


class XiDiagnostic(NamedTuple):
    min_modulus: float
    max_modulus: float
    log_lipschitz: float


def _omega(t: np.ndarray) -> np.ndarray:
    return t * np.abs(np.log(t))


def xi_diagnostic(
    u,
    N: int,
    radius: float,
    min_radius: float | None = None,
    n_theta: int = 24,
    pair_cap: float = 0.25,
) -> XiDiagnostic:
    """Sample xi(z) = i conj(grad u) / z^{N-1} on a punctured polar grid.

    Returns the modulus range and the largest increment quotient
    |xi(z1) - xi(z2)| / omega(|z1 - z2|) with omega(t) = t |log t| over
    pairs closer than ``pair_cap``.  A modulus collapsing below 1e-8 (true
    order above N) or exploding beyond 1e8 toward the center (true order
    below N) raises `OrderMismatch`.  For discrete fields set ``min_radius``
    to a few mesh widths; mismatch detection then only sees that annulus.
    """
    if min_radius is None:
        min_radius = radius * 2.0 ** -40
    if not 0 < min_radius < radius:
        raise ValueError("need 0 < min_radius < radius")
    n_lev = max(2, int(np.ceil(np.log2(radius / min_radius))) + 1)
    rr = radius * (min_radius / radius) ** (np.linspace(0.0, 1.0, n_lev))
    th = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    R, T = np.meshgrid(rr, th, indexing="ij")
    z = (R * np.exp(1j * T)).ravel()
    pts = np.column_stack([z.real, z.imag])
    g = np.asarray(field_gradients(u, pts))
    gc = g[:, 0] + 1j * g[:, 1]
    xi = 1j * np.conj(gc) / z ** (N - 1)
    mod = np.abs(xi)
    mn, mx = float(mod.min()), float(mod.max())
    if mn < 1e-8:
        raise OrderMismatch(
            f"|xi| collapses to {mn:.2e}: declared order {N} is below the true one"
        )
    if mx > 1e8:
        raise OrderMismatch(
            f"|xi| blows up to {mx:.2e}: declared order {N} exceeds the true one"
        )
    dz = np.abs(z[:, None] - z[None, :])
    dxi = np.abs(xi[:, None] - xi[None, :])
    mask = (dz > 0.0) & (dz <= pair_cap)
    quot = np.zeros_like(dz)
    quot[mask] = dxi[mask] / _omega(dz[mask])
    return XiDiagnostic(mn, mx, float(quot.max()))
