"""Triangulated discs, half discs, and piecewise linear functions on them.

The laboratory works on structured triangulations of a disc (or upper half
disc) built from concentric rings: ring ``i`` of ``n`` carries ``6 i``
vertices, which keeps the triangles close to equilateral at every scale.
A mesh can be geometrically graded toward its center (each extra ring
halves the radius) to resolve vanishing-order phenomena there.

`Mesh2D` is a plain container with cached derived quantities; `GridFunction`
wraps nodal values of a P1 (piecewise linear) field together with point
evaluation and gradient recovery.  Point location and linear interpolation
are delegated to :mod:`matplotlib.tri`.

Mesh level conventions: ``disc_mesh(level)`` uses ``2**level`` rings, so the
mesh size ``h`` (max edge length) is about ``1.05 * radius / 2**level``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from matplotlib.tri import LinearTriInterpolator, Triangulation

from .errors import MeshQualityError

MIN_ANGLE_DEG = 20.0


@dataclass
class Mesh2D:
    """A conforming triangulation of a planar region.

    Parameters
    ----------
    vertices:
        Array of shape ``(nv, 2)``.
    triangles:
        Integer array of shape ``(nt, 3)``; orientation is normalized to
        counterclockwise on construction.
    markers:
        Named vertex index sets.  Disc meshes carry ``"outer"`` (the outer
        circle); half-disc meshes add ``"symmetry"`` (the straight edge).
    radius, center:
        Nominal radius and center of the meshed disc.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    markers: dict[str, np.ndarray] = field(default_factory=dict)
    radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshQualityError("vertices must have shape (nv, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshQualityError("triangles must have shape (nt, 3)")
        if self.triangles.min(initial=0) < 0 or self.triangles.max(initial=-1) >= len(self.vertices):
            raise MeshQualityError("triangle indices out of range")
        # normalize orientation so that all signed areas are positive
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        flip = signed < 0
        if flip.any():
            self.triangles = self.triangles.copy()
            self.triangles[flip] = self.triangles[flip][:, [0, 2, 1]]
        self.markers = {k: np.asarray(v, dtype=np.int64) for k, v in self.markers.items()}
        self.validate()

    # -- quality -----------------------------------------------------------

    def validate(self):
        """Raise `MeshQualityError` unless all triangles are sound.

        Soundness means strictly positive area and a minimum interior angle
        of at least 20 degrees.
        """
        if len(self.triangles) == 0:
            raise MeshQualityError("mesh has no triangles")
        if np.any(self.areas <= 0):
            raise MeshQualityError("mesh contains a degenerate (non-positive area) triangle")
        min_angle = float(np.degrees(self.angles.min()))
        if min_angle < MIN_ANGLE_DEG - 1e-9:
            raise MeshQualityError(
                f"minimum triangle angle {min_angle:.3f} deg below {MIN_ANGLE_DEG} deg"
            )

    # -- cached geometry ----------------------------------------------------

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def angles(self) -> np.ndarray:
        """Interior angles in radians, shape ``(nt, 3)``."""
        p = self.vertices[self.triangles]
        out = np.empty((len(self.triangles), 3))
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cosv = np.sum(a * b, axis=1) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            out[:, k] = np.arccos(np.clip(cosv, -1.0, 1.0))
        return out

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return np.stack(
            [np.linalg.norm(p[:, (k + 1) % 3] - p[:, k], axis=1) for k in range(3)],
            axis=1,
        )

    @property
    def h(self) -> float:
        """Mesh size: the maximum edge length."""
        return float(self.edge_lengths.max())

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """Gradients of the three P1 basis functions per triangle, ``(nt, 3, 2)``."""
        p = self.vertices[self.triangles]
        out = np.empty((len(self.triangles), 3, 2))
        two_a = 2.0 * self.areas
        for k in range(3):
            # grad of barycentric k is the inward normal of the opposite edge
            e = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
            out[:, k, 0] = -e[:, 1]
            out[:, k, 1] = e[:, 0]
        out /= two_a[:, None, None]
        return out

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs, shape ``(ne, 2)``."""
        e = np.concatenate(
            [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
        )
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def _edge_counts(self) -> np.ndarray:
        e = np.concatenate(
            [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
        )
        e.sort(axis=1)
        _, inverse = np.unique(e, axis=0, return_inverse=True)
        return np.bincount(inverse, minlength=len(self.edges))

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        bdry_edges = self.edges[self._edge_counts == 1]
        return np.unique(bdry_edges)

    @cached_property
    def vertex_areas(self) -> np.ndarray:
        """Lumped vertex areas (one third of adjacent triangle areas)."""
        out = np.zeros(len(self.vertices))
        np.add.at(out, self.triangles.ravel(), np.repeat(self.areas / 3.0, 3))
        return out

    @cached_property
    def triangulation(self) -> Triangulation:
        return Triangulation(self.vertices[:, 0], self.vertices[:, 1], self.triangles)

    @cached_property
    def trifinder(self):
        return self.triangulation.get_trifinder()

    @cached_property
    def triangle_neighbors(self) -> np.ndarray:
        """For each triangle the neighbor across each edge, -1 on the boundary."""
        return self.triangulation.neighbors

    def find_triangles(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.trifinder(pts[:, 0], pts[:, 1])

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.find_triangles(points) >= 0

    def vertex_index_at(self, point, tol=1e-12) -> int:
        d = np.linalg.norm(self.vertices - np.asarray(point, dtype=float), axis=1)
        i = int(np.argmin(d))
        if d[i] > tol * max(self.radius, 1.0):
            raise MeshQualityError(f"no mesh vertex at {point}")
        return i

    # -- plain text round trip ----------------------------------------------

    def to_text(self) -> str:
        lines = [str(len(self.vertices))]
        for x, y in self.vertices:
            lines.append(f"{x!r} {y!r}")
        lines.append(str(len(self.triangles)))
        for i, j, k in self.triangles:
            lines.append(f"{i} {j} {k}")
        for name in sorted(self.markers):
            idx = " ".join(str(i) for i in self.markers[name])
            lines.append(f"{name} {idx}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Mesh2D":
        tokens = text.split("\n")
        tokens = [t for t in tokens if t.strip()]
        pos = 0
        nv = int(tokens[pos]); pos += 1
        verts = np.array(
            [[float(w) for w in tokens[pos + i].split()] for i in range(nv)]
        )
        pos += nv
        nt = int(tokens[pos]); pos += 1
        tris = np.array(
            [[int(w) for w in tokens[pos + i].split()] for i in range(nt)], dtype=np.int64
        )
        pos += nt
        markers = {}
        for line in tokens[pos:]:
            parts = line.split()
            markers[parts[0]] = np.array([int(w) for w in parts[1:]], dtype=np.int64)
        center = verts.mean(axis=0)
        radius = float(np.max(np.linalg.norm(verts - center, axis=1)))
        return cls(verts, tris, markers, radius=radius, center=tuple(center))


# ---------------------------------------------------------------------------
# structured disc meshes
# ---------------------------------------------------------------------------


def _ring_points(radius, count, center):
    theta = 2.0 * np.pi * np.arange(count) / count
    return np.column_stack(
        [center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)]
    )


def _annulus_triangles(outer_ids, inner_ids):
    """Triangulate between two rings with 6i and 6(i-1) vertices (or equal)."""
    no, ni = len(outer_ids), len(inner_ids)
    tris = []
    if ni == no:
        m = no // 6
        for s in range(6):
            for j in range(m):
                o0 = outer_ids[(s * m + j) % no]
                o1 = outer_ids[(s * m + j + 1) % no]
                i0 = inner_ids[(s * m + j) % ni]
                i1 = inner_ids[(s * m + j + 1) % ni]
                tris.append((o0, o1, i0))
                tris.append((i0, o1, i1))
        return tris
    i = no // 6
    assert ni == 6 * (i - 1)
    for s in range(6):
        for j in range(i):
            o0 = outer_ids[(s * i + j) % no]
            o1 = outer_ids[(s * i + j + 1) % no]
            i0 = inner_ids[(s * (i - 1) + j) % ni]
            tris.append((o0, o1, i0))
        for j in range(i - 1):
            i0 = inner_ids[(s * (i - 1) + j) % ni]
            i1 = inner_ids[(s * (i - 1) + j + 1) % ni]
            o1 = outer_ids[(s * i + j + 1) % no]
            tris.append((i0, o1, i1))
    return tris


def disc_mesh(level: int, radius: float = 1.0, center=(0.0, 0.0), grade_rings: int = 0) -> Mesh2D:
    """Structured triangulation of a disc.

    ``2**level`` concentric rings; ring ``i`` carries ``6 i`` vertices.  With
    ``grade_rings = G > 0`` the innermost cell layer is replaced by ``G``
    geometrically graded rings (radius halves per ring, 6 vertices each), so
    the resolution near the center improves by a factor ``2**G`` without
    touching the rest of the mesh.
    """
    if level < 1:
        raise MeshQualityError("mesh level must be >= 1")
    n = 2 ** level
    center = np.asarray(center, dtype=float)
    verts = [center[None, :]]
    ring_ids = [np.array([0])]  # ring 0 is the center vertex
    next_id = 1
    radii = [radius * i / n for i in range(1, n + 1)]
    counts = [6 * i for i in range(1, n + 1)]
    if grade_rings > 0:
        graded_r = [radii[0] / 2 ** g for g in range(1, grade_rings + 1)]
        radii = graded_r[::-1] + radii
        counts = [6] * grade_rings + counts
    for r, c in zip(radii, counts):
        verts.append(_ring_points(r, c, center))
        ring_ids.append(np.arange(next_id, next_id + c))
        next_id += c
    vertices = np.concatenate(verts, axis=0)

    tris = []
    # innermost ring to the center vertex
    first = ring_ids[1]
    m = len(first)
    for j in range(m):
        tris.append((first[j], first[(j + 1) % m], 0))
    for k in range(2, len(ring_ids)):
        tris.extend(_annulus_triangles(ring_ids[k], ring_ids[k - 1]))

    markers = {"outer": ring_ids[-1].copy()}
    return Mesh2D(vertices, np.array(tris), markers, radius=radius, center=tuple(center))


def half_disc_mesh(level: int, radius: float = 1.0) -> Mesh2D:
    """Upper half disc ``{y >= 0}``, symmetry line on ``y = 0``.

    Derived from `disc_mesh` by keeping the triangles with centroid above the
    axis; ring vertices fall exactly on ``y = 0`` so no triangle straddles it.
    Markers: ``"outer"`` is the circular arc (its two endpoints included),
    ``"symmetry"`` the straight edge.
    """
    full = disc_mesh(level, radius=radius, center=(0.0, 0.0))
    keep = full.centroids[:, 1] > 0
    tris = full.triangles[keep]
    used = np.unique(tris)
    remap = -np.ones(len(full.vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    vertices = full.vertices[used]
    tris = remap[tris]
    on_axis = np.abs(vertices[:, 1]) <= 1e-14 * radius
    on_arc = np.isin(used, full.markers["outer"])
    markers = {
        "outer": np.nonzero(on_arc)[0],
        "symmetry": np.nonzero(on_axis)[0],
    }
    return Mesh2D(vertices, tris, markers, radius=radius, center=(0.0, 0.0))


# ---------------------------------------------------------------------------
# P1 grid functions
# ---------------------------------------------------------------------------


class GridFunction:
    """Nodal values of a piecewise linear field on a `Mesh2D`.

    Supports point evaluation, raw per-triangle gradients, and recovered
    (area-averaged, then linearly interpolated) gradients.  Arithmetic with
    another `GridFunction` on the same mesh operates nodally.
    """

    def __init__(self, mesh: Mesh2D, values: np.ndarray, active: np.ndarray | None = None):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (len(mesh.vertices),):
            raise ValueError("values must be one per mesh vertex")
        self.active = active  # optional vertex mask for component solves
        self._interp = None
        self._grad_interp = None

    # -- evaluation ---------------------------------------------------------

    def _interpolator(self):
        if self._interp is None:
            self._interp = LinearTriInterpolator(
                self.mesh.triangulation, self.values, trifinder=self.mesh.trifinder
            )
        return self._interp

    def values_at(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = self._interpolator()(pts[:, 0], pts[:, 1])
        if np.ma.is_masked(out):
            raise ValueError("evaluation point outside the mesh")
        return np.ma.getdata(out)

    def tri_gradients(self) -> np.ndarray:
        """P1 gradient per triangle, shape ``(nt, 2)``."""
        g = self.mesh.barycentric_gradients
        vals = self.values[self.mesh.triangles]
        return np.einsum("tk,tkd->td", vals, g)

    def vertex_gradients(self) -> np.ndarray:
        """Area-weighted recovery of the gradient at vertices, ``(nv, 2)``.

        Component solutions (an ``active`` mask is set) recover one-sided:
        only fully active triangles contribute, so interface vertices see
        the trace gradient from inside the component, not the zero fill.
        """
        tg = self.tri_gradients()
        w = self.mesh.areas
        if self.active is not None:
            full = np.all(self.active[self.mesh.triangles], axis=1)
            w = np.where(full, w, 0.0)
        num = np.zeros((len(self.mesh.vertices), 2))
        den = np.zeros(len(self.mesh.vertices))
        idx = self.mesh.triangles.ravel()
        np.add.at(num, idx, np.repeat(tg * w[:, None], 3, axis=0))
        np.add.at(den, idx, np.repeat(w, 3))
        if self.active is not None and np.any(den == 0.0):
            # vertices with no fully active neighbor (e.g. where several
            # interface curves meet) fall back to the unrestricted average
            numf = np.zeros_like(num)
            denf = np.zeros_like(den)
            np.add.at(numf, idx, np.repeat(tg * self.mesh.areas[:, None], 3, axis=0))
            np.add.at(denf, idx, np.repeat(self.mesh.areas, 3))
            hole = den == 0.0
            num[hole] = numf[hole]
            den[hole] = denf[hole]
        return num / den[:, None]

    def gradients_at(self, points: np.ndarray, recovered: bool = True) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not recovered:
            t = self.mesh.find_triangles(pts)
            if np.any(t < 0):
                raise ValueError("evaluation point outside the mesh")
            return self.tri_gradients()[t]
        if self._grad_interp is None:
            vg = self.vertex_gradients()
            tri = self.mesh.triangulation
            self._grad_interp = (
                LinearTriInterpolator(tri, vg[:, 0], trifinder=self.mesh.trifinder),
                LinearTriInterpolator(tri, vg[:, 1], trifinder=self.mesh.trifinder),
            )
        gx = self._grad_interp[0](pts[:, 0], pts[:, 1])
        gy = self._grad_interp[1](pts[:, 0], pts[:, 1])
        if np.ma.is_masked(gx) or np.ma.is_masked(gy):
            raise ValueError("evaluation point outside the mesh")
        return np.column_stack([np.ma.getdata(gx), np.ma.getdata(gy)])

    def eval_with_gradient(self, points: np.ndarray):
        return self.values_at(points), self.gradients_at(points)

    # -- norms ---------------------------------------------------------------

    def l2_norm(self, weight: np.ndarray | None = None) -> float:
        """L2 norm via exact integration of the P1 square per triangle."""
        v = self.values[self.mesh.triangles]
        # exact: int_T (sum v_i lambda_i)^2 = area/12 * (sum v_i^2 + (sum v_i)^2)
        per_tri = (np.sum(v ** 2, axis=1) + np.sum(v, axis=1) ** 2) / 12.0
        a = self.mesh.areas if weight is None else self.mesh.areas * weight
        return float(np.sqrt(np.sum(per_tri * a)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    # -- nodal arithmetic -----------------------------------------------------

    def _check_same_mesh(self, other: "GridFunction"):
        if other.mesh is not self.mesh:
            raise ValueError("grid functions live on different meshes")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check_same_mesh(other)
            return GridFunction(self.mesh, self.values + other.values, self.active)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check_same_mesh(other)
            return GridFunction(self.mesh, self.values - other.values, self.active)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            return GridFunction(self.mesh, self.values * c, self.active)
        return NotImplemented

    __rmul__ = __mul__
