"""Planar triangle meshes: construction, deformation, quality control.

A mesh is an immutable triangulation of a polygonal domain with an ordered
boundary polygon and per-node markers.  Deformations move the boundary by a
displacement field and extend it to the interior either pointwise or
harmonically; a deformation that would invert or degenerate elements is
rejected with a quality report instead of a mesh.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.spatial import Delaunay

INTERIOR = 0
DIRICHLET = 1

# Validity floors for deformed meshes and the regularity cap enforced at
# construction.  The angle floor (1 degree) bounds the aspect ratio well
# below REGULARITY_MAX, so any candidate passing the floors is constructible.
AREA_FLOOR = 1e-10
ANGLE_FLOOR = np.pi / 180.0
REGULARITY_MAX = 150.0


class GeometryError(ValueError):
    """Raised when mesh data violates a structural invariant."""


@dataclass(frozen=True)
class MeshQualityReport:
    min_area: float
    min_angle: float
    max_aspect: float
    is_valid: bool

    @staticmethod
    def from_arrays(nodes: np.ndarray, triangles: np.ndarray,
                    area_floor: float = AREA_FLOOR,
                    angle_floor: float = ANGLE_FLOOR) -> "MeshQualityReport":
        areas = signed_areas(nodes, triangles)
        angles = min_angles(nodes, triangles)
        aspects = aspect_ratios(nodes, triangles)
        min_area = float(areas.min())
        min_angle = float(angles.min())
        max_aspect = float(aspects.max()) if min_area > 0 else np.inf
        return MeshQualityReport(
            min_area=min_area,
            min_angle=min_angle,
            max_aspect=max_aspect,
            is_valid=bool(min_area > area_floor and min_angle > angle_floor),
        )


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """z-component of the cross product of stacked 2D vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (nodes[triangles[:, k]] for k in range(3))
    return 0.5 * cross2(p1 - p0, p2 - p0)


def edge_lengths(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Lengths of the three edges of each triangle, edge k opposite vertex k."""
    p = nodes[triangles]  # (M, 3, 2)
    out = np.empty(triangles.shape, dtype=float)
    for k in range(3):
        out[:, k] = np.linalg.norm(p[:, (k + 1) % 3] - p[:, (k + 2) % 3], axis=1)
    return out


def min_angles(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    areas = signed_areas(nodes, triangles)
    ls = edge_lengths(nodes, triangles)
    # sin of the angle at vertex k from 2A = b*c*sin(alpha_k)
    bc = ls[:, (1, 2, 0)] * ls[:, (2, 0, 1)]
    with np.errstate(divide="ignore", invalid="ignore"):
        sines = np.clip(2.0 * areas[:, None] / bc, -1.0, 1.0)
    # obtuse angles have the same sine; the minimum angle is always acute
    sines = np.where(np.isfinite(sines), sines, 0.0)
    return np.arcsin(sines).min(axis=1)


def aspect_ratios(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Diameter over inball diameter, h(K) / rho(K)."""
    areas = signed_areas(nodes, triangles)
    ls = edge_lengths(nodes, triangles)
    h = ls.max(axis=1)
    perimeter = ls.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = 4.0 * areas / perimeter
        out = np.where(rho > 0, h / np.maximum(rho, 1e-300), np.inf)
    return out


def _segments_intersect(a0, a1, b0, b1) -> np.ndarray:
    """Proper-intersection test for segment batches, broadcasting over axis 0."""
    def orient(p, q, r):
        return cross2(q - p, r - p)

    d1 = orient(b0, b1, a0)
    d2 = orient(b0, b1, a1)
    d3 = orient(a0, a1, b0)
    d4 = orient(a0, a1, b1)
    return (np.sign(d1) * np.sign(d2) < 0) & (np.sign(d3) * np.sign(d4) < 0)


def polygon_is_simple(points: np.ndarray) -> bool:
    """Check that the closed polygon has no proper self-intersections."""
    n = len(points)
    seg0 = points
    seg1 = points[(np.arange(n) + 1) % n]
    for i in range(n - 1):
        js = np.arange(i + 1, n)
        # adjacent segments share an endpoint; skip them
        js = js[(js != i + 1) & ~((i == 0) & (js == n - 1))]
        if js.size == 0:
            continue
        hits = _segments_intersect(seg0[js], seg1[js], seg0[i], seg1[i])
        if hits.any():
            return False
    return True


@dataclass(frozen=True)
class Mesh:
    """Immutable planar triangulation with an ordered boundary polygon.

    nodes: (N, 2) coordinates; triangles: (M, 3) vertex indices in
    counterclockwise order; boundary_nodes: ordered node indices of the
    closed boundary polygon (first node not repeated); node_marker: per-node
    INTERIOR / DIRICHLET tag.
    """
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    node_marker: np.ndarray
    h_max: float = field(init=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        bnd = np.ascontiguousarray(self.boundary_nodes, dtype=np.int64)
        marker = np.ascontiguousarray(self.node_marker, dtype=np.int8)
        for arr, name in ((nodes, "nodes"), (tris, "triangles"),
                          (bnd, "boundary_nodes"), (marker, "node_marker")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not np.isfinite(nodes).all():
            raise GeometryError("non-finite node coordinates")
        areas = signed_areas(nodes, tris)
        if areas.size == 0 or areas.min() <= 0:
            raise GeometryError("triangle with non-positive signed area")
        aspects = aspect_ratios(nodes, tris)
        if aspects.max() > REGULARITY_MAX:
            raise GeometryError(
                f"shape regularity violated: aspect {aspects.max():.3g} "
                f"> {REGULARITY_MAX}")
        self._check_boundary(nodes, tris, bnd, marker)
        object.__setattr__(self, "h_max",
                           float(edge_lengths(nodes, tris).max()))

    @staticmethod
    def _check_boundary(nodes, tris, bnd, marker):
        edges = np.concatenate([tris[:, (0, 1)], tris[:, (1, 2)], tris[:, (2, 0)]])
        key = np.sort(edges, axis=1)
        uniq, counts = np.unique(key, axis=0, return_counts=True)
        boundary_edges = uniq[counts == 1]
        if (counts > 2).any():
            raise GeometryError("edge shared by more than two triangles")
        topo_boundary = set(boundary_edges.ravel().tolist())
        if topo_boundary != set(bnd.tolist()):
            raise GeometryError("boundary polygon does not match mesh boundary")
        edge_set = {tuple(e) for e in boundary_edges.tolist()}
        n = len(bnd)
        for i in range(n):
            a, b = int(bnd[i]), int(bnd[(i + 1) % n])
            if (min(a, b), max(a, b)) not in edge_set:
                raise GeometryError("boundary polygon edge missing from mesh")
        if not polygon_is_simple(nodes[bnd]):
            raise GeometryError("boundary polygon self-intersects")
        dirichlet = np.flatnonzero(marker == DIRICHLET)
        if not set(dirichlet.tolist()) <= topo_boundary:
            raise GeometryError("dirichlet marker on non-boundary node")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_marker == DIRICHLET)

    @property
    def areas(self) -> np.ndarray:
        return signed_areas(self.nodes, self.triangles)

    def quality(self) -> MeshQualityReport:
        return MeshQualityReport.from_arrays(self.nodes, self.triangles)

    def boundary_polygon(self) -> np.ndarray:
        """Boundary coordinates in polygon order, first point not repeated."""
        return self.nodes[self.boundary_nodes]


def make_square_mesh(n: int) -> Mesh:
    """Uniform right-triangle mesh of the unit square with n subdivisions."""
    if n < 2:
        raise GeometryError(f"square mesh needs n >= 2, got {n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def idx(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    triangles = np.array(tris, dtype=np.int64)

    bottom = [idx(i, 0) for i in range(n)]
    right = [idx(n, j) for j in range(n)]
    top = [idx(i, n) for i in range(n, 0, -1)]
    left = [idx(0, j) for j in range(n, 0, -1)]
    boundary = np.array(bottom + right + top + left, dtype=np.int64)

    marker = np.full(len(nodes), INTERIOR, dtype=np.int8)
    marker[boundary] = DIRICHLET
    return Mesh(nodes, triangles, boundary, marker)


def make_disk_mesh(center, radius: float, n_boundary: int,
                   target_h: float) -> Mesh:
    """Triangulated regular polygon inscribed in a circle.

    The boundary is a regular n_boundary-gon; the interior is filled with a
    uniform point grid of spacing ~target_h and Delaunay-triangulated.
    """
    if radius <= 0:
        raise GeometryError(f"disk radius must be positive, got {radius}")
    if n_boundary < 8:
        raise GeometryError(f"need at least 8 boundary nodes, got {n_boundary}")
    if target_h <= 0:
        raise GeometryError(f"target_h must be positive, got {target_h}")
    center = np.asarray(center, dtype=float)
    theta = 2.0 * np.pi * np.arange(n_boundary) / n_boundary
    ring = center + radius * np.column_stack([np.cos(theta), np.sin(theta)])

    # interior grid, offset from the center to avoid cocircular degeneracies,
    # kept clear of the polygon by a fraction of the target spacing
    s = target_h
    ks = np.arange(-int(np.ceil(radius / s)) - 2, int(np.ceil(radius / s)) + 3)
    gx = center[0] + (ks + 0.31) * s
    gy = center[1] + (ks + 0.37) * s
    xx, yy = np.meshgrid(gx, gy, indexing="xy")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    inradius = radius * np.cos(np.pi / n_boundary)
    keep = np.linalg.norm(pts - center, axis=1) <= inradius - 0.6 * s
    interior = pts[keep]

    points = np.vstack([ring, interior])
    tri = Delaunay(points)
    triangles = tri.simplices.astype(np.int64)
    areas = signed_areas(points, triangles)
    flip = areas < 0
    triangles[flip] = triangles[flip][:, ::-1]

    boundary = np.arange(n_boundary, dtype=np.int64)
    marker = np.full(len(points), INTERIOR, dtype=np.int8)
    marker[boundary] = DIRICHLET
    return Mesh(points, triangles, boundary, marker)


def laplace_extension(mesh: Mesh, boundary_values: np.ndarray) -> np.ndarray:
    """Extend per-boundary-node data (B, k) harmonically to all nodes.

    Solves the componentwise discrete Laplace problem with the given values
    as Dirichlet data on the boundary polygon.
    """
    from . import fem  # local import to avoid a cycle at module load

    boundary_values = np.atleast_2d(np.asarray(boundary_values, dtype=float))
    if boundary_values.shape[0] != len(mesh.boundary_nodes):
        boundary_values = boundary_values.T
    matrix = fem.assemble_operator(mesh, diffusion_weight=1.0, mass_coeff=0.0)
    out = np.zeros((mesh.n_nodes, boundary_values.shape[1]))
    if not np.any(boundary_values):
        return out
    solver = None
    for k in range(boundary_values.shape[1]):
        system = fem.SparseSymSystem(
            matrix=matrix,
            rhs=np.zeros(mesh.n_nodes),
            dirichlet_nodes=mesh.boundary_nodes,
            dirichlet_values=boundary_values[:, k],
        )
        if solver is None:
            solver = fem.FactorizedSystem(system)
        out[:, k] = solver.solve(system.rhs, system.dirichlet_values)
    return out


def apply_displacement(mesh: Mesh, displacement: np.ndarray, t: float,
                       area_floor: float = AREA_FLOOR,
                       angle_floor: float = ANGLE_FLOOR,
                       ) -> Union[Mesh, MeshQualityReport]:
    """Move every node by t * displacement, gated on the validity floors."""
    if t == 0.0:
        return mesh
    candidate = mesh.nodes + t * displacement
    report = MeshQualityReport.from_arrays(candidate, mesh.triangles,
                                           area_floor, angle_floor)
    if not report.is_valid:
        return report
    if not polygon_is_simple(candidate[mesh.boundary_nodes]):
        return MeshQualityReport(report.min_area, report.min_angle,
                                 report.max_aspect, is_valid=False)
    return Mesh(candidate, mesh.triangles, mesh.boundary_nodes,
                mesh.node_marker)


def deform_mesh(mesh: Mesh, g, t: float,
                mode: str = "harmonic") -> Union[Mesh, MeshQualityReport]:
    """Deform the mesh by the field g scaled with t.

    Boundary nodes always move to x + t*g(x).  Interior nodes move the same
    way in mode "direct", or follow the harmonic extension of the boundary
    displacement in mode "harmonic" (default).  Returns the quality report
    instead of a mesh when the deformation violates the validity floors.
    """
    if t < 0:
        raise GeometryError(f"deformation step must be >= 0, got {t}")
    values = np.asarray(g.xy if hasattr(g, "xy") else g, dtype=float)
    if values.shape != (mesh.n_nodes, 2):
        raise GeometryError("displacement field does not match mesh nodes")
    if mode == "direct":
        displacement = values
    elif mode == "harmonic":
        displacement = laplace_extension(mesh, values[mesh.boundary_nodes])
    else:
        raise GeometryError(f"unknown deformation mode {mode!r}")
    return apply_displacement(mesh, displacement, t)
