"""Oriented discrete 2-manifolds and their circumcentric duals.

A surface is described by vertex positions embedded in 3D and polygonal
face loops.  ``build_complex`` canonicalizes edges, repairs face
orientations so that neighbouring faces induce opposite signs on shared
edges, and assembles the signed incidence (boundary) operators as sparse
integer matrices.  ``build_dual`` attaches the circumcentric dual metric:
primal edge lengths / face areas and dual edge lengths / vertex areas.

All flat meshes may live in any plane of the embedding; curved surfaces
(spheres, scanned models) are treated piecewise flat, face by face.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

PLANARITY_RTOL = 1e-9
CONCYCLIC_RTOL = 1e-9
ZERO_DUAL_RTOL = 1e-12


class MeshError(ValueError):
    """Invalid mesh topology or geometry."""


class NonManifoldError(MeshError):
    """An undirected edge is shared by more than two faces."""


class NonOrientableError(MeshError):
    """No globally consistent face orientation exists."""


class DegenerateFaceError(MeshError):
    """A face loop repeats a vertex or has fewer than three."""


class NonPlanarError(MeshError):
    """A polygonal face deviates from its best plane beyond tolerance."""


class NonConcyclicError(MeshError):
    """Face vertices admit no common circumcenter within tolerance."""


class NonAcuteError(MeshError):
    """A face does not strictly contain its circumcenter (strict mode)."""


@dataclass
class SimplicialSurface:
    """Oriented 2-complex: vertices, canonical edges, polygonal faces.

    ``edges[i] = (tail, head)`` with ``tail < head``.  ``boundary1`` is the
    (n_vertices x n_edges) signed incidence of edges on vertices (+1 at the
    head, -1 at the tail); ``boundary2`` is the (n_edges x n_faces) signed
    incidence of faces on edges (+1 where the face traverses tail->head).
    Both are integer matrices, so ``boundary1 @ boundary2 == 0`` holds
    exactly.  Instances are immutable by convention after construction.
    """

    vertices: np.ndarray
    edges: np.ndarray
    faces: list[np.ndarray]
    face_edges: list[np.ndarray]
    face_edge_signs: list[np.ndarray]
    boundary1: sp.csr_matrix
    boundary2: sp.csr_matrix
    is_closed: bool
    boundary_edges: np.ndarray

    # coboundary (exterior derivative) operators, cached transposes
    d0: sp.csr_matrix = field(repr=False, default=None)
    d1: sp.csr_matrix = field(repr=False, default=None)

    def __post_init__(self):
        if self.d0 is None:
            self.d0 = self.boundary1.T.tocsr()
        if self.d1 is None:
            self.d1 = self.boundary2.T.tocsr()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def boundary_edge_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_edges, dtype=bool)
        mask[self.boundary_edges] = True
        return mask


@dataclass
class DualMesh:
    """Circumcentric dual metric of a :class:`SimplicialSurface`.

    ``dual_edge_lengths[e]`` is the straight-line distance between the two
    adjacent face circumcenters (interior edge) or from the single
    circumcenter to the edge midpoint (boundary edge); in lenient mode the
    value is signed, negative when a circumcenter falls on the wrong side.
    ``dual_vertex_areas`` uses the truncated dual cell at the boundary.
    """

    circumcenters: np.ndarray
    edge_lengths: np.ndarray
    face_areas: np.ndarray
    dual_edge_lengths: np.ndarray
    dual_vertex_areas: np.ndarray
    acute_flags: np.ndarray
    face_normals: np.ndarray
    strict: bool


@dataclass
class MeshQualityReport:
    n_vertices: int
    n_edges: int
    n_faces: int
    euler_characteristic: int
    is_closed: bool
    n_boundary_edges: int
    min_edge_length: float
    max_edge_length: float
    min_dual_edge_length: float
    n_nonacute_faces: int

    def lines(self) -> list[str]:
        return [
            f"vertices            {self.n_vertices}",
            f"edges               {self.n_edges}",
            f"faces               {self.n_faces}",
            f"euler characteristic {self.euler_characteristic}",
            f"closed              {'yes' if self.is_closed else 'no'}",
            f"boundary edges      {self.n_boundary_edges}",
            f"edge length         [{self.min_edge_length:.12g}, {self.max_edge_length:.12g}]",
            f"min dual length     {self.min_dual_edge_length:.12g}",
            f"non-acute faces     {self.n_nonacute_faces}",
        ]

    def __str__(self) -> str:
        return "\n".join(self.lines())


def build_complex(vertices, face_loops) -> SimplicialSurface:
    """Assemble an oriented 2-complex from positions and face loops.

    Edges are deduplicated and canonically oriented (tail index < head
    index).  Face orientations are repaired by breadth-first propagation so
    that two faces sharing an edge traverse it in opposite directions;
    inputs admitting no such assignment raise :class:`NonOrientableError`.

    Raises
    ------
    DegenerateFaceError, NonManifoldError, NonOrientableError, MeshError
    """
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 3:
        raise MeshError("vertices must be an (n, 3) array of coordinates")
    if not np.isfinite(verts).all():
        raise MeshError("vertex coordinates must be finite")
    n_v = len(verts)

    loops = []
    for i, loop in enumerate(face_loops):
        loop = tuple(int(v) for v in loop)
        if len(loop) < 3:
            raise DegenerateFaceError(f"face {i} needs at least 3 vertices")
        if min(loop) < 0 or max(loop) >= n_v:
            raise MeshError(f"face {i} references a vertex out of range")
        if len(set(loop)) != len(loop):
            raise DegenerateFaceError(f"face {i} repeats a vertex")
        loops.append(loop)
    n_f = len(loops)

    def pairs(loop):
        return zip(loop, loop[1:] + loop[:1])

    # undirected edge table, counted per incident face
    edge_faces: dict[tuple[int, int], list[int]] = {}
    for f, loop in enumerate(loops):
        for a, b in pairs(loop):
            key = (a, b) if a < b else (b, a)
            incident = edge_faces.setdefault(key, [])
            incident.append(f)
            if len(incident) > 2:
                raise NonManifoldError(f"edge {key} has more than two faces")

    # repair orientations: BFS over the face adjacency graph, flipping
    # neighbours whose traversal of the shared edge matches instead of
    # opposing.  Deterministic for a fixed input ordering.
    def traversal(loop, key):
        # +1 if the loop walks key[0] -> key[1]
        for a, b in pairs(loop):
            if (a, b) == key:
                return 1
            if (b, a) == key:
                return -1
        raise AssertionError("edge not on face")

    seen = [False] * n_f
    for seed in range(n_f):
        if seen[seed]:
            continue
        seen[seed] = True
        queue = [seed]
        while queue:
            f = queue.pop()
            loop_f = loops[f]
            for a, b in pairs(loop_f):
                key = (a, b) if a < b else (b, a)
                for g in edge_faces[key]:
                    if g == f:
                        continue
                    same = traversal(loop_f, key) == traversal(loops[g], key)
                    if not seen[g]:
                        if same:
                            loops[g] = loops[g][::-1]
                        seen[g] = True
                        queue.append(g)
                    elif same:
                        raise NonOrientableError(
                            f"faces {f} and {g} cannot be oriented consistently"
                        )

    # canonical edge ids: lexicographic order of (tail, head)
    edge_keys = sorted(edge_faces)
    edge_index = {key: i for i, key in enumerate(edge_keys)}
    edges = np.array(edge_keys, dtype=np.int64).reshape(-1, 2)
    n_e = len(edges)

    face_edges, face_signs = [], []
    rows2, cols2, vals2 = [], [], []
    for f, loop in enumerate(loops):
        eids = np.empty(len(loop), dtype=np.int64)
        signs = np.empty(len(loop), dtype=np.int64)
        for k, (a, b) in enumerate(pairs(loop)):
            eids[k] = edge_index[(a, b) if a < b else (b, a)]
            signs[k] = 1 if a < b else -1
        face_edges.append(eids)
        face_signs.append(signs)
        rows2.extend(eids)
        cols2.extend([f] * len(loop))
        vals2.extend(signs)

    boundary2 = sp.csr_matrix(
        (vals2, (rows2, cols2)), shape=(n_e, n_f), dtype=np.int64
    )
    boundary1 = sp.csr_matrix(
        (
            np.concatenate([-np.ones(n_e, np.int64), np.ones(n_e, np.int64)]),
            (np.concatenate([edges[:, 0], edges[:, 1]]),
             np.concatenate([np.arange(n_e), np.arange(n_e)])),
        ),
        shape=(n_v, n_e),
        dtype=np.int64,
    )

    n_incident = np.asarray(abs(boundary2).sum(axis=1)).ravel()
    boundary_edges = np.flatnonzero(n_incident == 1)

    return SimplicialSurface(
        vertices=verts,
        edges=edges,
        faces=[np.asarray(loop, dtype=np.int64) for loop in loops],
        face_edges=face_edges,
        face_edge_signs=face_signs,
        boundary1=boundary1,
        boundary2=boundary2,
        is_closed=len(boundary_edges) == 0,
        boundary_edges=boundary_edges,
    )


def _cross(a, b):
    # np.cross carries large per-call overhead on small inputs
    return np.stack([
        a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
        a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
        a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
    ], axis=-1)


def _face_normal(pts):
    # Newell normal; right-handed with respect to the loop direction
    nrm = _cross(pts, np.roll(pts, -1, axis=0)).sum(axis=0)
    length = np.linalg.norm(nrm)
    if length == 0.0:
        raise MeshError("degenerate face: zero area")
    return nrm / length, 0.5 * length


def circumcenter(points) -> np.ndarray:
    """Circumcenter of a planar concyclic polygon embedded in 3D.

    Triangles use the closed-form barycentric expression.  Larger polygons
    are solved least-squares in the face plane and must be equidistant from
    the result to within ``1e-9`` of the circumradius.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        raise MeshError("circumcenter needs at least 3 points")

    if len(pts) == 3:
        a, b, c = pts
        ab, ac = b - a, c - a
        n = _cross(ab, ac)
        nn = float(n @ n)
        scale = max(float(ab @ ab), float(ac @ ac))
        if nn <= (1e-14 * scale) ** 2 * scale:
            raise MeshError("collinear triangle vertices")
        center = a + (_cross(ac * (ab @ ab) - ab * (ac @ ac), n)) / (2.0 * nn)
        return center

    centroid = pts.mean(axis=0)
    rel = pts - centroid
    normal, _ = _face_normal(pts)
    diameter = 2.0 * np.max(np.linalg.norm(rel, axis=1))
    off_plane = np.abs(rel @ normal).max()
    if off_plane > PLANARITY_RTOL * diameter:
        raise NonPlanarError(f"face deviates from a plane by {off_plane:.3g}")

    # in-plane orthonormal frame
    u = rel[0] - (rel[0] @ normal) * normal
    u /= np.linalg.norm(u)
    w = np.cross(normal, u)
    xy = np.column_stack([rel @ u, rel @ w])

    # |c - p_i|^2 equal for all i : 2 (p_i - p_0) . c = |p_i|^2 - |p_0|^2
    A = 2.0 * (xy[1:] - xy[0])
    rhs = (xy[1:] ** 2).sum(axis=1) - (xy[0] ** 2).sum()
    sol, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < 2:
        raise MeshError("collinear polygon vertices")
    radii = np.linalg.norm(xy - sol, axis=1)
    radius = radii.mean()
    if radius == 0.0 or np.abs(radii - radius).max() > CONCYCLIC_RTOL * radius:
        raise NonConcyclicError(
            "polygon vertices are not concyclic within tolerance"
        )
    return centroid + sol[0] * u + sol[1] * w


def build_dual(surface: SimplicialSurface, strict: bool = True) -> DualMesh:
    """Compute circumcenters and all primal/dual measures.

    In strict mode (default) every face must strictly contain its
    circumcenter, matching the well-centeredness the schemes assume.  With
    ``strict=False`` non-acute faces are admitted: dual edge lengths are
    signed (negative when a circumcenter sits on the wrong side of its
    edge) and a warning is emitted.
    """
    n_e, n_f = surface.n_edges, surface.n_faces
    verts = surface.vertices

    centers = np.empty((n_f, 3))
    areas = np.empty(n_f)
    normals = np.empty((n_f, 3))
    acute = np.ones(n_f, dtype=bool)
    # signed circumcenter-to-edge-line distances, per (face, local edge)
    side = [None] * n_f

    for f, loop in enumerate(surface.faces):
        pts = verts[loop]
        normal, area = _face_normal(pts)
        if len(pts) > 3:
            rel = pts - pts.mean(axis=0)
            diameter = 2.0 * np.max(np.linalg.norm(rel, axis=1))
            off = np.abs(rel @ normal).max()
            if off > PLANARITY_RTOL * diameter:
                raise NonPlanarError(f"face {f} deviates from a plane by {off:.3g}")
        center = circumcenter(pts)
        nxt = np.roll(pts, -1, axis=0)
        tangents = nxt - pts
        tangents /= np.linalg.norm(tangents, axis=1)[:, None]
        inward = _cross(np.broadcast_to(normal, tangents.shape), tangents)
        dists = ((center - 0.5 * (pts + nxt)) * inward).sum(axis=1)
        centers[f] = center
        areas[f] = area
        normals[f] = normal
        side[f] = dists
        acute[f] = bool((dists > 0.0).all())

    if strict and not acute.all():
        bad = np.flatnonzero(~acute)
        raise NonAcuteError(
            f"{len(bad)} face(s) do not contain their circumcenter "
            f"(first: face {int(bad[0])}); rebuild with strict=False to "
            f"admit signed dual lengths"
        )
    if not acute.all():
        warnings.warn(
            f"{int((~acute).sum())} non-acute face(s): dual lengths are signed",
            RuntimeWarning,
            stacklevel=2,
        )

    edge_vec = verts[surface.edges[:, 1]] - verts[surface.edges[:, 0]]
    edge_lengths = np.linalg.norm(edge_vec, axis=1)
    midpoints = 0.5 * (verts[surface.edges[:, 0]] + verts[surface.edges[:, 1]])

    # locate the one or two faces adjacent to each edge, plus the signed
    # side distance of their circumcenters
    adj_faces = [[] for _ in range(n_e)]
    for f in range(n_f):
        for k, e in enumerate(surface.face_edges[f]):
            adj_faces[e].append((f, side[f][k]))

    dual_lengths = np.empty(n_e)
    for e in range(n_e):
        inc = adj_faces[e]
        if len(inc) == 2:
            (f1, d1), (f2, d2) = inc
            length = np.linalg.norm(centers[f1] - centers[f2])
            sign = 1.0 if d1 + d2 > 0 else (-1.0 if d1 + d2 < 0 else 0.0)
        else:
            (f1, d1), = inc
            length = np.linalg.norm(centers[f1] - midpoints[e])
            sign = 1.0 if d1 > 0 else (-1.0 if d1 < 0 else 0.0)
        dual_lengths[e] = sign * length
        # lenient mode tolerates degenerate duals so that reports can still
        # be produced; the solver rejects them when the timestep is bounded
        if strict and abs(dual_lengths[e]) <= ZERO_DUAL_RTOL * edge_lengths[e]:
            raise MeshError(
                f"zero dual length on edge {e}: adjacent circumcenters coincide"
            )

    # dual vertex areas: per face corner, the signed quad
    # (v, next edge midpoint, circumcenter, previous edge midpoint)
    dual_areas = np.zeros(surface.n_vertices)
    for f, loop in enumerate(surface.faces):
        pts = verts[loop]
        mids = 0.5 * (pts + np.roll(pts, -1, axis=0))
        to_center = centers[f] - pts
        quads = 0.5 * (
            _cross(mids - pts, to_center)
            + _cross(to_center, np.roll(mids, 1, axis=0) - pts)
        ) @ normals[f]
        np.add.at(dual_areas, loop, quads)

    return DualMesh(
        circumcenters=centers,
        edge_lengths=edge_lengths,
        face_areas=areas,
        dual_edge_lengths=dual_lengths,
        dual_vertex_areas=dual_areas,
        acute_flags=acute,
        face_normals=normals,
        strict=strict,
    )


def mesh_quality(surface: SimplicialSurface, dual: DualMesh | None = None) -> MeshQualityReport:
    """Report-only summary of mesh health.

    Non-acute faces and degenerate duals are counted rather than raised
    (the dual is built in lenient mode when not supplied).
    """
    if dual is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            dual = build_dual(surface, strict=False)
    return MeshQualityReport(
        n_vertices=surface.n_vertices,
        n_edges=surface.n_edges,
        n_faces=surface.n_faces,
        euler_characteristic=surface.euler_characteristic,
        is_closed=surface.is_closed,
        n_boundary_edges=len(surface.boundary_edges),
        min_edge_length=float(dual.edge_lengths.min()),
        max_edge_length=float(dual.edge_lengths.max()),
        min_dual_edge_length=float(dual.dual_edge_lengths.min()),
        n_nonacute_faces=int((~dual.acute_flags).sum()),
    )
