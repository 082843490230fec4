"""Mesh families used by tests, validation studies and demos.

Flat meshes are placed in the z = 0 plane.  All generators are
deterministic for fixed arguments (randomized ones take a seed).
"""

from __future__ import annotations

import numpy as np

from .mesh import SimplicialSurface, build_complex

# all-acute 14-triangle split of the unit square (max angle ~72.4 deg,
# min ~44.6 deg), verified numerically; corners + 4 edge midpoints +
# 4 interior points, 180-degree rotationally symmetric
_ACUTE_P = (0.375, 0.38)
_ACUTE_S = (0.67, 0.33)


def rectangle_grid(nx: int, ny: int | None = None, hx: float = 1.0,
                   hy: float | None = None) -> SimplicialSurface:
    """nx x ny grid of rectangular faces with spacings hx, hy."""
    if ny is None:
        ny = nx
    if hy is None:
        hy = hx
    if nx < 1 or ny < 1:
        raise ValueError("grid needs at least one cell per direction")
    xs = np.arange(nx + 1) * hx
    ys = np.arange(ny + 1) * hy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])

    def vid(i, j):
        return i * (ny + 1) + j

    faces = [
        [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
        for i in range(nx)
        for j in range(ny)
    ]
    return build_complex(verts, faces)


def square_grid(n: int, h: float = 1.0) -> SimplicialSurface:
    """Uniform n x n grid of square faces with spacing h."""
    return rectangle_grid(n, n, h, h)


def equilateral_patch(nx: int, ny: int, a: float = 1.0) -> SimplicialSurface:
    """Strip patch of equilateral triangles of side a (open, zigzag rim).

    Rows are offset by a/2 with row spacing a*sqrt(3)/2; every triangle is
    exactly equilateral, which makes the patch the reference fixture for
    the uniform-mesh timestep bound.
    """
    if nx < 1 or ny < 1:
        raise ValueError("patch needs at least one cell per direction")
    dy = a * np.sqrt(3.0) / 2.0
    verts = []
    index = {}
    for j in range(ny + 1):
        for i in range(nx + 1):
            index[(i, j)] = len(verts)
            verts.append(((i + 0.5 * (j % 2)) * a, j * dy, 0.0))
    faces = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = index[(i, j)], index[(i + 1, j)]
            v01, v11 = index[(i, j + 1)], index[(i + 1, j + 1)]
            if j % 2 == 0:
                # upper row shifted right
                faces.append([v00, v10, v01])
                faces.append([v10, v11, v01])
            else:
                faces.append([v00, v10, v11])
                faces.append([v00, v11, v01])
    return build_complex(np.asarray(verts), faces)


def _acute_cell_topology():
    """Local vertex tags and the 14 triangles of the acute square split."""
    P = _ACUTE_P
    S = _ACUTE_S
    T = (1.0 - P[0], 1.0 - P[1])
    Q = (1.0 - S[0], 1.0 - S[1])
    local = {
        "A": (0.0, 0.0), "B": (1.0, 0.0), "C": (1.0, 1.0), "D": (0.0, 1.0),
        "Mb": (0.5, 0.0), "Mr": (1.0, 0.5), "Mt": (0.5, 1.0), "Ml": (0.0, 0.5),
        "P": P, "S": S, "T": T, "Q": Q,
    }
    tris = [
        ("A", "Mb", "P"), ("Mb", "S", "P"), ("Mb", "B", "S"),
        ("B", "Mr", "S"), ("Mr", "T", "S"), ("Mr", "C", "T"),
        ("C", "Mt", "T"), ("Mt", "Q", "T"), ("Mt", "D", "Q"),
        ("D", "Ml", "Q"), ("Ml", "P", "Q"), ("Ml", "A", "P"),
        ("P", "S", "T"), ("P", "T", "Q"),
    ]
    return local, tris


def _all_acute(verts, faces):
    v = np.asarray(verts)
    for tri in faces:
        a, b, c = v[tri[0]], v[tri[1]], v[tri[2]]
        for p, q, r in ((a, b, c), (b, c, a), (c, a, b)):
            if np.dot(q - p, r - p) <= 0.0:
                return False
    return True


def acute_triangle_grid(n: int, size: float = 1.0, jitter: float = 0.0,
                        seed: int = 0) -> SimplicialSurface:
    """All-acute triangulation of the square [0, size]^2, n x n cells.

    Each cell is split into 14 acute triangles.  ``jitter`` displaces the
    interior points of every cell by up to ``jitter * size/n``; the
    amplitude is halved until every triangle stays acute, so the returned
    mesh always satisfies the circumcenter-containment requirement.
    """
    if n < 1:
        raise ValueError("n must be positive")
    local, tris = _acute_cell_topology()
    h = size / n

    # global ids: cell corners and edge midpoints are shared between cells
    verts = []
    index = {}

    def node(key):
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    faces = []
    interior_ids = []
    for i in range(n):
        for j in range(n):
            ids = {}
            for tag, (x, y) in local.items():
                if tag in ("P", "S", "T", "Q"):
                    vid = node((i, j, tag))
                    interior_ids.append(vid)
                else:
                    # half-integer lattice key keeps shared nodes exact
                    vid = node((round(2 * (i + x)), round(2 * (j + y))))
                ids[tag] = vid
            for t in tris:
                faces.append([ids[t[0]], ids[t[1]], ids[t[2]]])

    coords = np.zeros((len(verts), 3))
    for key, vid in index.items():
        if len(key) == 3:
            i, j, tag = key
            x, y = local[tag]
            coords[vid, :2] = ((i + x) * h, (j + y) * h)
        else:
            coords[vid, :2] = (key[0] * h / 2.0, key[1] * h / 2.0)

    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        offsets = rng.uniform(-1.0, 1.0, size=(len(interior_ids), 2))
        amp = jitter * h
        while amp > 0.0:
            trial = coords.copy()
            trial[interior_ids, :2] += amp * offsets
            if _all_acute(trial, faces):
                coords = trial
                break
            amp *= 0.5
            if amp < 1e-6 * h:
                break

    return build_complex(coords, faces)


def icosphere(subdivisions: int = 1, radius: float = 1.0) -> SimplicialSurface:
    """Closed triangulated sphere: subdivided icosahedron, all faces acute."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=float)
    verts /= np.linalg.norm(verts[0])
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]

    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = 0.5 * (np.array(verts[i]) + np.array(verts[j]))
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(tuple(m))
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces

    coords = radius * np.asarray(verts)
    return build_complex(coords, faces)


def random_triangulation(n_points: int = 121, seed: int = 0,
                         size: float = 1.0) -> SimplicialSurface:
    """Delaunay triangulation of a jittered grid (combinatorial tests).

    Roughly ``2 * n_points`` triangles; acuteness is not guaranteed, so
    callers needing the dual should use :func:`acute_triangle_grid`.
    """
    from scipy.spatial import Delaunay

    rng = np.random.default_rng(seed)
    nx = max(2, int(round(np.sqrt(n_points))))
    ny = max(2, int(round(n_points / nx)))
    X, Y = np.meshgrid(np.linspace(0.0, size, nx), np.linspace(0.0, size, ny),
                       indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts += rng.uniform(-0.25, 0.25, pts.shape) * (size / max(nx - 1, 1))
    tri = Delaunay(pts)
    verts = np.column_stack([pts, np.zeros(len(pts))])
    return build_complex(verts, [list(s) for s in tri.simplices])
