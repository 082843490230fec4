"""Executable checks of the scheme's headline claims.

Yee reduction on rectangular grids, stability threshold behaviour around
the CFL bound, divergence preservation, and convergence-order measurement
against analytic cavity modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import meshgen, solver
from .mesh import DualMesh, SimplicialSurface, build_dual
from .solver import MaterialField, SimState, TE, TM

# 2-point Gauss on [0, 1]
_GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


@dataclass
class ConvergenceReport:
    """Observed accuracy of a mesh family against the analytic mode."""

    resolutions: list
    errors: list
    observed_order: float

    def __post_init__(self):
        res = np.asarray(self.resolutions, dtype=float)
        if np.any(np.diff(res) >= 0.0):
            raise ValueError("resolutions must be strictly decreasing spacings")
        if np.any(np.asarray(self.errors) <= 0.0):
            raise ValueError("errors must be positive")

    def lines(self) -> list[str]:
        out = ["spacing        L2 error"]
        for h, e in zip(self.resolutions, self.errors):
            out.append(f"{h:<14.8g} {e:.8g}")
        out.append(f"observed order {self.observed_order:.4f}")
        return out


def yee_equivalence(n: int, h: float, hy: float | None = None,
                    polarization: str = TE) -> float:
    """Max relative deviation of the update coefficients from classic Yee.

    Builds an n x n rectangular grid and compares every interior-edge and
    per-face coefficient of the assembled scheme against the standard
    2D Yee values with per-direction spacings.
    """
    if n < 4:
        raise ValueError("grid must be at least 4 x 4")
    if polarization not in (TE, TM):
        raise ValueError("polarization must be 'TE' or 'TM'")
    hx = float(h)
    hy = hx if hy is None else float(hy)
    surface = meshgen.rectangle_grid(n, n, hx, hy)
    dual = build_dual(surface)
    dt = 0.99 * solver.cfl_dt(surface, dual)

    vec = surface.vertices[surface.edges[:, 1]] - surface.vertices[surface.edges[:, 0]]
    along_x = np.abs(vec[:, 0]) > np.abs(vec[:, 1])
    h_perp = np.where(along_x, hy, hx)

    interior = ~surface.boundary_edge_mask
    # half-step update: dt / (m |*e|) against dt / (m h_perp)
    dec_edge = dt / dual.dual_edge_lengths[interior]
    yee_edge = dt / h_perp[interior]
    dev = np.abs(dec_edge - yee_edge) / yee_edge
    worst = float(dev.max())

    # full-step update: dt |e| / (m |P|) against dt / (m h_perp), per
    # (face, edge) incidence; the material constant cancels in the ratio
    for f in range(surface.n_faces):
        eids = surface.face_edges[f]
        dec_face = dt * dual.edge_lengths[eids] / dual.face_areas[f]
        yee_face = dt / h_perp[eids]
        worst = max(worst, float((np.abs(dec_face - yee_face) / yee_face).max()))
    return worst


def cavity_omega(m: int, n: int, a: float, b: float, c: float = 1.0) -> float:
    """Angular frequency of the (m, n) standing mode in an a x b cavity."""
    return c * np.pi * np.sqrt((m / a) ** 2 + (n / b) ** 2)


def _cavity_fields(polarization, m, n, a, b, epsilon, mu):
    """Smooth standing-mode fields; the half-step field carries sin(w t)."""
    kx, ky = m * np.pi / a, n * np.pi / b
    c = 1.0 / np.sqrt(epsilon * mu)
    w = cavity_omega(m, n, a, b, c)
    if polarization == TE:
        def face_field(x, y, t):  # out-of-plane H
            return np.cos(kx * x) * np.cos(ky * y) * np.sin(w * t)

        def edge_field(x, y, t):  # in-plane E
            ex = (ky / (epsilon * w)) * np.cos(kx * x) * np.sin(ky * y) * np.cos(w * t)
            ey = -(kx / (epsilon * w)) * np.sin(kx * x) * np.cos(ky * y) * np.cos(w * t)
            return ex, ey
    else:
        def face_field(x, y, t):  # out-of-plane E
            return np.sin(kx * x) * np.sin(ky * y) * np.cos(w * t)

        def edge_field(x, y, t):  # in-plane H
            hx = -(ky / (mu * w)) * np.sin(kx * x) * np.cos(ky * y) * np.sin(w * t)
            hy = (kx / (mu * w)) * np.cos(kx * x) * np.sin(ky * y) * np.sin(w * t)
            return hx, hy
    return face_field, edge_field


def cavity_solution(surface: SimplicialSurface, dual: DualMesh,
                    polarization: str, m: int, n: int, a: float, b: float,
                    t: float, epsilon: float = 1.0, mu: float = 1.0):
    """Exact cochain averages of the (m, n) cavity mode at time t.

    Returns ``(edge_values, face_values)`` matching the solver's field
    layout.  Edge cochains use 2-point Gauss along each edge; triangle
    faces use the degree-2 midpoint rule and quads a 2 x 2 tensor rule,
    so the quadrature error sits below the scheme's own order.
    """
    if m < 1 or n < 1:
        raise ValueError("mode indices must be >= 1")
    face_field, edge_field = _cavity_fields(polarization, m, n, a, b, epsilon, mu)
    verts = surface.vertices

    tails = verts[surface.edges[:, 0]]
    heads = verts[surface.edges[:, 1]]
    tangents = (heads - tails) / dual.edge_lengths[:, None]
    edge_vals = np.zeros(surface.n_edges)
    for g in _GAUSS2:
        pts = tails + g * (heads - tails)
        fx, fy = edge_field(pts[:, 0], pts[:, 1], t)
        edge_vals += 0.5 * (fx * tangents[:, 0] + fy * tangents[:, 1])

    face_vals = np.zeros(surface.n_faces)
    for f, loop in enumerate(surface.faces):
        pts = verts[loop]
        if len(loop) == 3:
            mids = 0.5 * (pts + np.roll(pts, -1, axis=0))
            face_vals[f] = np.mean(face_field(mids[:, 0], mids[:, 1], t))
        elif len(loop) == 4:
            acc = 0.0
            for gx in _GAUSS2:
                for gy in _GAUSS2:
                    p = (pts[0] * (1 - gx) * (1 - gy) + pts[1] * gx * (1 - gy)
                         + pts[2] * gx * gy + pts[3] * (1 - gx) * gy)
                    acc += 0.25 * face_field(p[0], p[1], t)
            face_vals[f] = acc
        else:
            raise ValueError("cavity cochains support triangles and quads only")
    return edge_vals, face_vals


def _cavity_state(surface, dual, polarization, m, n, a, b, dt, epsilon, mu):
    """Staggered initial state: edge field at -dt/2, face field at 0."""
    edge0, _ = cavity_solution(surface, dual, polarization, m, n, a, b,
                               -0.5 * dt, epsilon, mu)
    _, face0 = cavity_solution(surface, dual, polarization, m, n, a, b,
                               0.0, epsilon, mu)
    state = SimState.zeros(surface, polarization, dt)
    state.edge[:] = edge0
    state.face[:] = face0
    return state


def _weighted_l2(dual, d_edge, d_face):
    w_edge = dual.edge_lengths * dual.dual_edge_lengths
    return float(np.sqrt(np.sum(d_edge**2 * w_edge)
                         + np.sum(d_face**2 * dual.face_areas)))


def convergence_study(polarization: str, family: str, mode=(1, 1),
                      final_time: float = 0.45, resolutions=(8, 16, 32, 64),
                      safety: float = 0.99, jitter: float = 0.25,
                      seed: int = 0) -> ConvergenceReport:
    """Run the cavity mode on a mesh family and fit the observed order.

    ``family`` is ``uniform-quad`` or ``unstructured-tri`` (acute jittered
    triangulations); the timestep follows the mesh's own stability bound,
    so space and time are refined together.  The error is the
    dual-measure-weighted L2 distance between numerical and analytic
    cochains at the final (staggered) times.
    """
    if family not in ("uniform-quad", "unstructured-tri"):
        raise ValueError(f"unknown mesh family: {family}")
    if len(resolutions) < 3:
        raise ValueError("need at least three resolutions")
    m, n = mode
    a = b = 1.0
    spacings, errors = [], []
    for res in resolutions:
        if family == "uniform-quad":
            surface = meshgen.square_grid(res, 1.0 / res)
        else:
            surface = meshgen.acute_triangle_grid(res, size=1.0,
                                                  jitter=jitter, seed=seed + res)
        dual = build_dual(surface)
        materials = MaterialField.uniform(surface, polarization)
        dt = safety * solver.cfl_dt(surface, dual, materials.wave_speed)
        n_steps = max(1, int(round(final_time / dt)))
        state = _cavity_state(surface, dual, polarization, m, n, a, b, dt, 1.0, 1.0)
        cur = state
        for _ in range(n_steps):
            cur = solver.step(surface, dual, cur, materials)
            if not (np.isfinite(cur.edge).all() and np.isfinite(cur.face).all()):
                raise solver.InstabilityError(cur.step)
        t_face = n_steps * dt
        edge_ref, _ = cavity_solution(surface, dual, polarization, m, n, a, b,
                                      t_face - 0.5 * dt)
        _, face_ref = cavity_solution(surface, dual, polarization, m, n, a, b,
                                      t_face)
        errors.append(_weighted_l2(dual, cur.edge - edge_ref, cur.face - face_ref))
        spacings.append(1.0 / res)
    slope = np.polyfit(np.log(spacings), np.log(errors), 1)[0]
    return ConvergenceReport(resolutions=spacings, errors=errors,
                             observed_order=float(slope))


def stability_probe(surface: SimplicialSurface, dual: DualMesh, factors,
                    n_steps: int, polarization: str = TE, seed: int = 0,
                    growth_limit: float = 1e3) -> dict:
    """Classify each CFL safety factor as stable or unstable.

    Runs vacuum with small random fields at ``dt = factor * cfl_dt``;
    stable means the field energy never exceeds ``growth_limit`` times the
    initial value over the run.
    """
    materials = MaterialField.uniform(surface, polarization)
    base_dt = solver.cfl_dt(surface, dual, materials.wave_speed)
    rng = np.random.default_rng(seed)
    edge0 = 1e-3 * rng.standard_normal(surface.n_edges)
    face0 = 1e-3 * rng.standard_normal(surface.n_faces)

    results = {}
    for factor in factors:
        if factor <= 0.0:
            raise ValueError("factors must be positive")
        state = SimState.zeros(surface, polarization, factor * base_dt)
        state.edge[:] = edge0
        state.face[:] = face0
        e0 = solver.energy(state, materials, dual)
        stable = True
        cur = state
        for _ in range(n_steps):
            cur = solver.step(surface, dual, cur, materials)
            if not (np.isfinite(cur.edge).all() and np.isfinite(cur.face).all()):
                stable = False
                break
            if solver.energy(cur, materials, dual) > growth_limit * e0:
                stable = False
                break
        results[float(factor)] = stable
    return results


def divergence_preservation(surface: SimplicialSurface, dual: DualMesh,
                            polarization: str = TE, n_steps: int = 1000,
                            seed: int = 0) -> float:
    """Max relative Gauss-law residual over an n-step vacuum run.

    Initial data is divergence-free by construction: the half-step field
    starts at zero and the face flux comes from a potential (TE: B = dA;
    TM: the dual flux is a coboundary), so the residual must stay at the
    round-off floor.
    """
    rng = np.random.default_rng(seed)
    materials = MaterialField.uniform(surface, polarization)
    dt = 0.75 * solver.cfl_dt(surface, dual, materials.wave_speed)
    state = SimState.zeros(surface, polarization, dt)
    if polarization == TE:
        a = rng.standard_normal(surface.n_edges)
        state.face[:] = (surface.d1 @ a) / (materials.mu * dual.face_areas)
    else:
        psi = rng.standard_normal(surface.n_faces)
        state.edge[:] = (surface.boundary2 @ psi) / (materials.mu * dual.dual_edge_lengths)
        state.face[:] = rng.standard_normal(surface.n_faces)

    m_edge = materials.epsilon if polarization == TE else materials.mu
    worst = 0.0
    cur = state
    for _ in range(n_steps):
        cur = solver.step(surface, dual, cur, materials)
        mag, ele = solver.divergence_residuals(surface, dual, cur, materials)
        residual = ele if polarization == TE else mag
        flux = m_edge * cur.edge * dual.dual_edge_lengths
        scale = max(float(np.abs(flux).max()), 1e-300)
        worst = max(worst, residual / scale)
    return worst
