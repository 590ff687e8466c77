"""Triangulated 2-D domains: construction, measures, subsets, Hausdorff distance.

Meshes are plain arrays (vertices, triangles, ordered boundary edges) with
derived quantities cached at construction.  All triangles are stored
counterclockwise and boundary edges follow the boundary loop with the domain
on their left, so outward normals are the right-hand rotation of the edge
direction.  A :class:`MeshDomain` is immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import MeshError

__all__ = [
    "MeshDomain",
    "BoundarySubset",
    "InteriorSubset",
    "make_disk",
    "make_square",
    "hausdorff_distance",
    "annular_band",
    "save_mesh",
    "load_mesh",
]


class MeshDomain:
    """A triangulated planar domain with boundary bookkeeping.

    Parameters
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counterclockwise (flipped on load if needed)
    boundary_edges : (E, 2) int array in boundary-loop order, domain on the left
    kind : str
        Construction tag ("disk", "square" or "custom"); some operations
        (symmetrization, arc enumeration) require a disk.
    """

    def __init__(self, vertices, triangles, boundary_edges, kind="custom", radius=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
        self.kind = kind
        self.radius = radius
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (V, 2) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be a (T, 3) array")
        self._orient_and_cache()
        self._check_invariants()

    # -- derived data -------------------------------------------------------

    def _orient_and_cache(self):
        p = self.vertices[self.triangles]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        flip = cross < 0
        if np.any(flip):
            tri = self.triangles.copy()
            tri[flip] = tri[flip][:, [0, 2, 1]]
            self.triangles = tri
            p = self.vertices[self.triangles]
            cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        self.tri_areas = 0.5 * cross
        self.tri_centroids = p.mean(axis=1)
        be = self.vertices[self.boundary_edges]
        vec = be[:, 1] - be[:, 0]
        self.edge_lengths = np.hypot(vec[:, 0], vec[:, 1])
        # domain on the left of the edge direction -> outward normal (ty, -tx)
        tangent = vec / self.edge_lengths[:, None]
        self.edge_normals = np.column_stack([tangent[:, 1], -tangent[:, 0]])
        self.vertex_on_boundary = np.zeros(len(self.vertices), dtype=bool)
        self.vertex_on_boundary[self.boundary_edges.ravel()] = True
        # P1 shape-function gradients per triangle: grad(lambda_i) is the
        # 90-degree rotation of the opposite edge over twice the area.
        grads = np.empty((len(self.triangles), 3, 2))
        for i in range(3):
            e = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
            grads[:, i, 0] = -e[:, 1]
            grads[:, i, 1] = e[:, 0]
        self.shape_gradients = grads / (2.0 * self.tri_areas[:, None, None])

    def _check_invariants(self):
        if np.any(self.tri_areas <= 0):
            raise MeshError("degenerate triangle with nonpositive area")
        heads = self.boundary_edges[:, 0]
        tails = self.boundary_edges[:, 1]
        counts_h = np.bincount(heads, minlength=len(self.vertices))
        counts_t = np.bincount(tails, minlength=len(self.vertices))
        if not np.array_equal(counts_h, counts_t):
            raise MeshError("boundary edges do not form closed loops")
        # Euler characteristic of a disk-type triangulated domain
        edges = np.sort(self.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
        n_edges = len(np.unique(edges, axis=0))
        chi = len(self.vertices) - n_edges + len(self.triangles)
        self.euler_characteristic = int(chi)

    # -- measures -----------------------------------------------------------

    @property
    def area(self):
        return float(np.sum(self.tri_areas))

    @property
    def perimeter(self):
        return float(np.sum(self.edge_lengths))

    @property
    def diameter(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    @property
    def max_edge_length(self):
        p = self.vertices[self.triangles]
        lens = [np.hypot(*(p[:, (i + 1) % 3] - p[:, i]).T) for i in range(3)]
        return float(np.max(lens))

    # -- geometry helpers -----------------------------------------------------

    def distance_to_boundary(self, points):
        """Exact distance from each query point to the polygonal boundary."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.vertices[self.boundary_edges[:, 0]]
        b = self.vertices[self.boundary_edges[:, 1]]
        ab = b - a
        denom = np.einsum("ej,ej->e", ab, ab)
        ap = points[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pej,ej->pe", ap, ab) / denom, 0.0, 1.0)
        proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        d = np.linalg.norm(points[:, None, :] - proj, axis=2)
        return d.min(axis=1)

    def boundary_loops(self):
        """Boundary edge indices grouped per closed loop, in loop order."""
        next_edge = {}
        start_of = {}
        for idx, (a, b) in enumerate(self.boundary_edges):
            start_of[int(a)] = idx
        for idx, (a, b) in enumerate(self.boundary_edges):
            next_edge[idx] = start_of[int(b)]
        seen = np.zeros(len(self.boundary_edges), dtype=bool)
        loops = []
        for idx in range(len(self.boundary_edges)):
            if seen[idx]:
                continue
            loop = []
            cur = idx
            while not seen[cur]:
                seen[cur] = True
                loop.append(cur)
                cur = next_edge[cur]
            loops.append(loop)
        return loops

    def interpolator(self):
        """Point-location helper evaluating P1 fields at arbitrary interior points."""
        return _P1Locator(self)


class _P1Locator:
    def __init__(self, mesh):
        self.mesh = mesh
        self.tree = cKDTree(mesh.tri_centroids)
        p = mesh.vertices[mesh.triangles]
        # barycentric transform: lambda_{1,2} = M^{-1} (x - p0)
        cols = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        self.inv = np.linalg.inv(cols)
        self.origin = p[:, 0]

    def locate(self, points, k=24):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(points)
        tri_idx = np.full(n, -1, dtype=np.int64)
        bary = np.zeros((n, 3))
        k = min(k, len(self.mesh.triangles))
        _, cand = self.tree.query(points, k=k)
        cand = np.atleast_2d(cand)
        remaining = np.arange(n)
        for col in range(k):
            if len(remaining) == 0:
                break
            tri = cand[remaining, col]
            rel = points[remaining] - self.origin[tri]
            lam12 = np.einsum("pij,pj->pi", self.inv[tri], rel)
            lam0 = 1.0 - lam12.sum(axis=1)
            lam = np.column_stack([lam0, lam12])
            inside = np.all(lam >= -1e-10, axis=1)
            hit = remaining[inside]
            tri_idx[hit] = tri[inside]
            bary[hit] = lam[inside]
            remaining = remaining[~inside]
        if len(remaining):
            raise MeshError(f"{len(remaining)} points fell outside the mesh")
        return tri_idx, bary

    def evaluate(self, values, points):
        tri_idx, bary = self.locate(points)
        return np.einsum("pi,pi->p", values[self.mesh.triangles[tri_idx]], bary)


@dataclass(frozen=True)
class BoundarySubset:
    """A set of boundary edges with its accumulated arc measure."""

    edge_indices: tuple
    achieved_measure: float

    @classmethod
    def from_edges(cls, mesh, edge_indices):
        idx = tuple(sorted(int(i) for i in edge_indices))
        if idx and (idx[0] < 0 or idx[-1] >= len(mesh.boundary_edges)):
            raise MeshError("boundary edge index out of range")
        measure = float(np.sum(mesh.edge_lengths[list(idx)])) if idx else 0.0
        return cls(idx, measure)


@dataclass(frozen=True)
class InteriorSubset:
    """A set of triangles with its accumulated area."""

    triangle_indices: tuple
    achieved_measure: float

    @classmethod
    def from_triangles(cls, mesh, triangle_indices):
        idx = tuple(sorted(int(i) for i in triangle_indices))
        if idx and (idx[0] < 0 or idx[-1] >= len(mesh.triangles)):
            raise MeshError("triangle index out of range")
        measure = float(np.sum(mesh.tri_areas[list(idx)])) if idx else 0.0
        return cls(idx, measure)


# -- constructors --------------------------------------------------------------


def make_disk(radius, target_h):
    """Quasi-uniform triangulation of a disk from concentric vertex rings.

    Boundary vertices lie exactly on the circle.  The combinatorics depend
    only on ``round(radius / target_h)``, so scaling ``radius`` and
    ``target_h`` together rescales vertex coordinates and nothing else.
    """
    if radius <= 0 or not (0 < target_h < radius):
        raise MeshError("need radius > 0 and 0 < target_h < radius")
    m = max(2, int(round(radius / target_h)))
    counts = [max(6, int(round(2.0 * math.pi * k))) for k in range(1, m + 1)]
    verts = [np.zeros((1, 2))]
    ring_ids = []
    ring_angles = []
    offset = 1
    for k, n_k in enumerate(counts, start=1):
        angles = 2.0 * math.pi * np.arange(n_k) / n_k
        r = radius * (k / m)
        verts.append(np.column_stack([r * np.cos(angles), r * np.sin(angles)]))
        ring_ids.append(np.arange(offset, offset + n_k))
        ring_angles.append(angles)
        offset += n_k
    vertices = np.vstack(verts)

    tris = []
    first = ring_ids[0]
    n1 = len(first)
    for j in range(n1):
        tris.append((0, first[j], first[(j + 1) % n1]))
    for k in range(1, m):
        tris.extend(_stitch_rings(vertices, ring_ids[k - 1], ring_angles[k - 1],
                                  ring_ids[k], ring_angles[k]))
    triangles = np.array(tris, dtype=np.int64)

    outer = ring_ids[-1]
    n_out = len(outer)
    boundary = np.column_stack([outer, np.roll(outer, -1)])
    return MeshDomain(vertices, triangles, boundary, kind="disk", radius=float(radius))


def _stitch_rings(vertices, inner_ids, inner_angles, outer_ids, outer_angles):
    """Deterministic two-pointer triangulation between consecutive rings.

    Advances whichever pointer creates the shorter new diagonal, which keeps
    stitch edges near the target spacing even when ring counts differ.
    """
    ni, no = len(inner_ids), len(outer_ids)
    tris = []
    i = j = 0
    while i < ni or j < no:
        cur_i = inner_ids[i % ni]
        cur_j = outer_ids[j % no]
        diag_inner = math.inf
        diag_outer = math.inf
        if i < ni:
            nxt = inner_ids[(i + 1) % ni]
            diag_inner = float(np.hypot(*(vertices[nxt] - vertices[cur_j])))
        if j < no:
            nxt = outer_ids[(j + 1) % no]
            diag_outer = float(np.hypot(*(vertices[nxt] - vertices[cur_i])))
        if diag_outer < diag_inner:
            tris.append((cur_i, cur_j, outer_ids[(j + 1) % no]))
            j += 1
        else:
            tris.append((cur_i, cur_j, inner_ids[(i + 1) % ni]))
            i += 1
    return tris


def make_square(side, target_h):
    """Structured right-triangle mesh of ``[0, side]^2`` with exact measures."""
    if side <= 0 or not (0 < target_h <= side):
        raise MeshError("need side > 0 and 0 < target_h <= side")
    n = max(1, int(round(side / target_h)))
    coords = np.linspace(0.0, side, n + 1)
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([xs.ravel(), ys.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    boundary = []
    for i in range(n):
        boundary.append((vid(i, 0), vid(i + 1, 0)))
    for j in range(n):
        boundary.append((vid(n, j), vid(n, j + 1)))
    for i in range(n, 0, -1):
        boundary.append((vid(i, n), vid(i - 1, n)))
    for j in range(n, 0, -1):
        boundary.append((vid(0, j), vid(0, j - 1)))
    return MeshDomain(vertices, np.array(tris, dtype=np.int64),
                      np.array(boundary, dtype=np.int64), kind="square")


# -- set operations -------------------------------------------------------------


def hausdorff_distance(X, Y):
    """Hausdorff distance between two nonempty finite point sets."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if len(X) == 0 or len(Y) == 0:
        raise MeshError("Hausdorff distance needs nonempty point sets")
    d_xy = cKDTree(Y).query(X)[0].max()
    d_yx = cKDTree(X).query(Y)[0].max()
    return float(max(d_xy, d_yx))


def annular_band(mesh, eps, delta):
    """Triangles whose centroid sits at a boundary distance in ``[eps, delta]``."""
    if not (0 <= eps < delta):
        raise MeshError("need 0 <= eps < delta")
    dist = mesh.distance_to_boundary(mesh.tri_centroids)
    sel = np.nonzero((dist >= eps) & (dist <= delta))[0]
    if len(sel) == 0:
        raise MeshError("annular band selects no triangles")
    return InteriorSubset.from_triangles(mesh, sel)


# -- plain-text mesh files -------------------------------------------------------


def save_mesh(mesh, path):
    """Write the sectioned plain-text format (17 significant digits)."""
    lines = ["#vertices"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    lines.append("#triangles")
    for a, b, c in mesh.triangles:
        lines.append(f"{a} {b} {c}")
    lines.append("#boundary_edges")
    for a, b in mesh.boundary_edges:
        lines.append(f"{a} {b}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path, kind="custom", radius=None):
    """Read the sectioned plain-text format written by :func:`save_mesh`."""
    sections = {"#vertices": [], "#triangles": [], "#boundary_edges": []}
    current = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line not in sections:
                    raise MeshError(f"unknown section {line!r}")
                current = sections[line]
                continue
            if current is None:
                raise MeshError("data before any section header")
            current.append(line.split())
    verts = np.array([[float(x) for x in row] for row in sections["#vertices"]])
    tris = np.array([[int(x) for x in row] for row in sections["#triangles"]],
                    dtype=np.int64)
    edges = np.array([[int(x) for x in row] for row in sections["#boundary_edges"]],
                     dtype=np.int64)
    return MeshDomain(verts, tris, edges, kind=kind, radius=radius)
