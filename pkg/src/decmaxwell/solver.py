"""Explicit TE/TM leapfrog time stepping with loss, sources and diagnostics.

Field layout (both polarizations share the same staggering):

* the edge field lives at half-integer times (TE: E, TM: H), stored as the
  tangential point value per edge (cochain / edge length);
* the face field lives at integer times (TE: H, TM: E), stored as the
  point value at the circumcenter (2-form cochain / face area).

One step first advances the edge field through time ``n*dt`` using the
face curl ``(H_1 - H_2)/|*e|``, then the face field through
``(n + 1/2)*dt`` using the edge circulation ``sum(sign * E * |e|)/|P|``.
With conductivities the time-averaged (semi-implicit) form is rearranged
into explicit update coefficients.

Default units are natural (eps0 = mu0 = c = 1); SI scales enter through
the material arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .mesh import DualMesh, SimplicialSurface

TE = "TE"
TM = "TM"

VACUUM_PERMITTIVITY_SI = 8.8541878128e-12
VACUUM_PERMEABILITY_SI = 1.25663706212e-6


class SolverError(ValueError):
    """Inconsistent solver inputs."""


class InstabilityError(RuntimeError):
    """Non-finite field values detected while stepping."""

    def __init__(self, step: int):
        super().__init__(f"non-finite field values at step {step}")
        self.step = step


@dataclass
class MaterialField:
    """Per-cell material data.

    ``epsilon``/``sigma`` live on the electric-field carrier cells and
    ``mu``/``sigma_m`` on the magnetic ones: edges/faces for TE and
    faces/edges for TM.
    """

    polarization: str
    epsilon: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    sigma_m: np.ndarray

    def __post_init__(self):
        if self.polarization not in (TE, TM):
            raise SolverError(f"polarization must be 'TE' or 'TM'")
        for name in ("epsilon", "mu", "sigma", "sigma_m"):
            arr = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, arr)
        if np.any(self.epsilon <= 0.0) or np.any(self.mu <= 0.0):
            raise SolverError("epsilon and mu must be positive everywhere")
        if np.any(self.sigma < 0.0) or np.any(self.sigma_m < 0.0):
            raise SolverError("conductivities must be nonnegative")

    @classmethod
    def uniform(cls, surface: SimplicialSurface, polarization: str,
                epsilon: float = 1.0, mu: float = 1.0,
                sigma: float = 0.0, sigma_m: float = 0.0) -> "MaterialField":
        n_edge, n_face = surface.n_edges, surface.n_faces
        n_e = n_edge if polarization == TE else n_face
        n_h = n_face if polarization == TE else n_edge
        return cls(
            polarization=polarization,
            epsilon=np.full(n_e, float(epsilon)),
            mu=np.full(n_h, float(mu)),
            sigma=np.full(n_e, float(sigma)),
            sigma_m=np.full(n_h, float(sigma_m)),
        )

    @property
    def wave_speed(self) -> float:
        """1/sqrt(min eps * min mu): the fastest speed the mesh carries."""
        return 1.0 / np.sqrt(float(self.epsilon.min()) * float(self.mu.min()))


@dataclass(frozen=True)
class GaussianPulse:
    """Soft (additive) current source amplitude*exp(-(t-t0)^2/(2 tau^2))."""

    cell: int
    amplitude: float
    t0: float
    tau: float
    target: str = "face"  # "edge" or "face": which current it feeds

    def __post_init__(self):
        if self.tau <= 0.0:
            raise SolverError("pulse width tau must be positive")
        if self.target not in ("edge", "face"):
            raise SolverError("pulse target must be 'edge' or 'face'")

    def value(self, t: float) -> float:
        arg = (t - self.t0) / self.tau
        return self.amplitude * np.exp(-0.5 * arg * arg)


@dataclass
class SourceSpec:
    """Current sources: explicit arrays/callables plus Gaussian pulses.

    ``edge_current``/``face_current`` may be None, a constant array over
    the respective cells, or a callable ``t -> array``.
    """

    edge_current: object = None
    face_current: object = None
    pulses: tuple = ()

    def is_empty(self) -> bool:
        return self.edge_current is None and self.face_current is None and not self.pulses


def apply_gaussian_source(sources: SourceSpec, t: float, n_edges: int,
                          n_faces: int) -> tuple[np.ndarray, np.ndarray]:
    """Instantaneous pulse contributions to the edge and face currents."""
    j_edge = np.zeros(n_edges)
    j_face = np.zeros(n_faces)
    for pulse in sources.pulses:
        target = j_edge if pulse.target == "edge" else j_face
        if not 0 <= pulse.cell < len(target):
            raise SolverError(
                f"pulse cell {pulse.cell} out of range for {pulse.target}s"
            )
        target[pulse.cell] += pulse.value(t)
    return j_edge, j_face


def _current(spec, t):
    if spec is None:
        return None
    if callable(spec):
        return np.asarray(spec(t), dtype=float)
    return np.asarray(spec, dtype=float)


def _currents_at(sources, t, n_edges, n_faces):
    """Total edge/face currents at time t (None when identically zero)."""
    if sources is None or sources.is_empty():
        return None, None
    j_edge, j_face = apply_gaussian_source(sources, t, n_edges, n_faces)
    extra = _current(sources.edge_current, t)
    if extra is not None:
        j_edge = j_edge + extra
    extra = _current(sources.face_current, t)
    if extra is not None:
        j_face = j_face + extra
    return j_edge, j_face


@dataclass
class SimState:
    """Staggered field pair plus step index.

    The face field is at time ``step*dt`` and the edge field at
    ``(step - 1/2)*dt``.
    """

    polarization: str
    edge: np.ndarray
    face: np.ndarray
    step: int
    dt: float
    vertex_charge: np.ndarray | None = None

    def __post_init__(self):
        if self.polarization not in (TE, TM):
            raise SolverError("polarization must be 'TE' or 'TM'")
        if self.dt <= 0.0:
            raise SolverError("dt must be positive")

    @classmethod
    def zeros(cls, surface: SimplicialSurface, polarization: str, dt: float) -> "SimState":
        return cls(
            polarization=polarization,
            edge=np.zeros(surface.n_edges),
            face=np.zeros(surface.n_faces),
            step=0,
            dt=dt,
            vertex_charge=np.zeros(surface.n_vertices),
        )

    @property
    def edge_time(self) -> float:
        return (self.step - 0.5) * self.dt

    @property
    def face_time(self) -> float:
        return self.step * self.dt


def cfl_dt(surface: SimplicialSurface, dual: DualMesh, c: float = 1.0) -> float:
    """Largest stable timestep: min over faces of sqrt(2|P| / sum(|e|/|*e|))/c.

    Boundary edges enter the per-face sum with their reflected dual length
    (twice the truncated circumcenter-to-midpoint distance), which is the
    row-sum bound of the reflective/PEC problem; on closed meshes the sum
    is exactly the per-face expression of the uniform spectral estimate.
    """
    if c <= 0.0:
        raise SolverError("wave speed must be positive")
    star = dual.dual_edge_lengths.copy()
    star[surface.boundary_edges] *= 2.0
    if np.any(star <= 0.0):
        raise SolverError("zero or negative dual edge length")
    best = np.inf
    for f in range(surface.n_faces):
        eids = surface.face_edges[f]
        s = float(np.sum(dual.edge_lengths[eids] / star[eids]))
        best = min(best, np.sqrt(2.0 * dual.face_areas[f] / s))
    return best / c


def spectral_dt_oracle(surface: SimplicialSurface, dual: DualMesh,
                       c: float = 1.0, max_iter: int = 50000,
                       tol: float = 1e-12, seed: int = 0) -> float:
    """Timestep bound from the extreme eigenvalue of the face wave operator.

    Power iteration on the symmetrized stencil ``(1/|P|) d1 (|e|/|*e|) d1^T``
    (absent neighbours are treated as zero, the reflective wall).  Returns
    ``2/sqrt(-lambda_min)``, an independent check of :func:`cfl_dt`.
    """
    import scipy.sparse as sp

    if np.any(dual.dual_edge_lengths <= 0.0):
        raise SolverError("zero or negative dual edge length")
    ratio = dual.edge_lengths / dual.dual_edge_lengths
    S = surface.d1 @ sp.diags(ratio) @ surface.boundary2
    inv_sqrt_p = 1.0 / np.sqrt(dual.face_areas)
    B = sp.diags(inv_sqrt_p) @ S @ sp.diags(inv_sqrt_p)

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(surface.n_faces)
    x /= np.linalg.norm(x)
    lam_prev = 0.0
    for it in range(max_iter):
        y = B @ x
        lam = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            raise SolverError("spectral oracle: operator annihilated the iterate")
        x = y / norm
        if it > 0 and abs(lam - lam_prev) <= tol * max(abs(lam), 1.0):
            return 2.0 / (c * np.sqrt(lam))
        lam_prev = lam
    raise SolverError(f"spectral oracle did not converge in {max_iter} iterations")


def _check_state(surface, dual, state, materials):
    if state.polarization != materials.polarization:
        raise SolverError("state and materials disagree on polarization")
    if len(state.edge) != surface.n_edges or len(state.face) != surface.n_faces:
        raise SolverError("state does not match the mesh")
    n_e = len(state.edge) if state.polarization == TE else len(state.face)
    if len(materials.epsilon) != n_e:
        raise SolverError("material arrays do not match the polarization placement")


def _advance(surface, dual, state, materials, sources, bc):
    """Shared half-update pair; sign conventions differ per polarization."""
    dt = state.dt
    n_edges, n_faces = surface.n_edges, surface.n_faces
    sgn = 1.0 if state.polarization == TE else -1.0

    if state.polarization == TE:
        m_edge, s_edge = materials.epsilon, materials.sigma
        m_face, s_face = materials.mu, materials.sigma_m
    else:
        m_edge, s_edge = materials.mu, materials.sigma_m
        m_face, s_face = materials.epsilon, materials.sigma

    # edge currents act at the integer time between the edge half steps,
    # face currents at the half step between the face updates
    j_edge, _ = _currents_at(sources, state.step * dt, n_edges, n_faces)
    _, j_face = _currents_at(sources, (state.step + 0.5) * dt, n_edges, n_faces)

    # edge field: time n-1/2 -> n+1/2, driven by the face difference
    rhs = sgn * (surface.boundary2 @ state.face) / dual.dual_edge_lengths
    if j_edge is not None:
        rhs = rhs - j_edge
    a = m_edge / dt + 0.5 * s_edge
    c1 = (m_edge / dt - 0.5 * s_edge) / a
    edge_new = c1 * state.edge + rhs / a

    charge = state.vertex_charge
    if j_edge is not None and charge is not None:
        # continuity: the dual Gauss-law target accumulates injected charge
        charge = charge - dt * (surface.boundary1 @ (j_edge * dual.dual_edge_lengths))

    if bc == "pec" and state.polarization == TE and len(surface.boundary_edges):
        edge_new[surface.boundary_edges] = 0.0

    # face field: time n -> n+1, driven by the edge circulation
    circ = surface.d1 @ (edge_new * dual.edge_lengths)
    rhs_f = -sgn * circ / dual.face_areas
    if j_face is not None:
        rhs_f = rhs_f - j_face
    a_f = m_face / dt + 0.5 * s_face
    c1_f = (m_face / dt - 0.5 * s_face) / a_f
    face_new = c1_f * state.face + rhs_f / a_f

    return replace(
        state, edge=edge_new, face=face_new, step=state.step + 1,
        vertex_charge=charge,
    )


def te_step(surface: SimplicialSurface, dual: DualMesh, state: SimState,
            materials: MaterialField, sources: SourceSpec | None = None,
            bc: str = "pec") -> SimState:
    """One TE leapfrog step: E on edges (half steps), H on faces.

    ``bc='pec'`` clamps the tangential E on boundary edges to zero;
    ``bc='none'`` uses the raw one-sided stencil (outside face value 0).
    Closed meshes are unaffected by ``bc``.
    """
    if state.polarization != TE:
        raise SolverError("te_step needs a TE state")
    _check_state(surface, dual, state, materials)
    return _advance(surface, dual, state, materials, sources, bc)


def tm_step(surface: SimplicialSurface, dual: DualMesh, state: SimState,
            materials: MaterialField, sources: SourceSpec | None = None,
            bc: str = "pec") -> SimState:
    """One TM leapfrog step: H on edges (half steps), E on faces.

    The PEC wall needs no clamp here: boundary edges read the single
    adjacent face against an outside value of zero (one-sided dual stencil).
    """
    if state.polarization != TM:
        raise SolverError("tm_step needs a TM state")
    _check_state(surface, dual, state, materials)
    return _advance(surface, dual, state, materials, sources, bc)


def step(surface, dual, state, materials, sources=None, bc="pec"):
    """Polarization-dispatching single step."""
    if state.polarization == TE:
        return te_step(surface, dual, state, materials, sources, bc)
    return tm_step(surface, dual, state, materials, sources, bc)


def step_reversed(surface: SimplicialSurface, dual: DualMesh, state: SimState,
                  materials: MaterialField, bc: str = "pec") -> SimState:
    """Exact algebraic inverse of a lossless, source-free step.

    Undoes the face update with the current edge field, then the edge
    update with the recovered face field.  Only meaningful with zero
    conductivities (the lossy scheme is not reversible).
    """
    _check_state(surface, dual, state, materials)
    dt = state.dt
    sgn = 1.0 if state.polarization == TE else -1.0
    m_edge = materials.epsilon if state.polarization == TE else materials.mu
    m_face = materials.mu if state.polarization == TE else materials.epsilon

    circ = surface.d1 @ (state.edge * dual.edge_lengths)
    face_old = state.face + (dt / m_face) * sgn * circ / dual.face_areas

    rhs = sgn * (surface.boundary2 @ face_old) / dual.dual_edge_lengths
    edge_old = state.edge - (dt / m_edge) * rhs
    if bc == "pec" and state.polarization == TE and len(surface.boundary_edges):
        edge_old[surface.boundary_edges] = 0.0

    return replace(state, edge=edge_old, face=face_old, step=state.step - 1)


def energy(state: SimState, materials: MaterialField, dual: DualMesh) -> float:
    """Discrete field energy at the state's own (staggered) times.

    ``1/2 sum eps E^2 |e||*e| + 1/2 sum mu H^2 |P|`` for TE; the TM
    expression swaps the material factors.
    """
    if state.polarization == TE:
        m_edge, m_face = materials.epsilon, materials.mu
    else:
        m_edge, m_face = materials.mu, materials.epsilon
    w_edge = dual.edge_lengths * dual.dual_edge_lengths
    edge_part = 0.5 * float(np.sum(m_edge * state.edge**2 * w_edge))
    face_part = 0.5 * float(np.sum(m_face * state.face**2 * dual.face_areas))
    return edge_part + face_part


def leapfrog_invariant(state: SimState, next_state: SimState,
                       materials: MaterialField, dual: DualMesh) -> float:
    """The quadratic form the lossless scheme conserves exactly.

    Uses the staggered product of consecutive edge fields around the face
    field: ``1/2 [ sum m_e E^{n+1/2} E^{n-1/2} w_e + sum m_f (H^n)^2 w_f ]``.
    Unlike :func:`energy` this does not oscillate on the mode scale, so it
    is the quantity to watch for secular drift.
    """
    if next_state.step != state.step + 1:
        raise SolverError("leapfrog_invariant needs consecutive states")
    if state.polarization == TE:
        m_edge, m_face = materials.epsilon, materials.mu
    else:
        m_edge, m_face = materials.mu, materials.epsilon
    w_edge = dual.edge_lengths * dual.dual_edge_lengths
    edge_part = 0.5 * float(np.sum(m_edge * state.edge * next_state.edge * w_edge))
    face_part = 0.5 * float(np.sum(m_face * state.face**2 * dual.face_areas))
    return edge_part + face_part


def divergence_residuals(surface: SimplicialSurface, dual: DualMesh,
                         state: SimState, materials: MaterialField,
                         charge: np.ndarray | None = None) -> tuple[float, float]:
    """Max-norm residuals of the two Gauss laws, (magnetic, electric).

    On a 2D space the law for the face-carried flux is a statement on
    3-cells and holds vacuously (reported as exactly zero); the dual law
    at vertices is the live constraint: TE checks the electric one,
    ``d^T D - accumulated charge``, TM the magnetic one.
    """
    if charge is None:
        charge = state.vertex_charge
    if charge is None:
        charge = np.zeros(surface.n_vertices)
    m_edge = materials.epsilon if state.polarization == TE else materials.mu
    dual_flux = m_edge * state.edge * dual.dual_edge_lengths
    residual = float(np.abs(surface.boundary1 @ dual_flux - charge).max())
    if state.polarization == TE:
        return 0.0, residual
    return residual, 0.0


@dataclass
class RunResult:
    """Probe time series, exported frames and the final state."""

    probe_labels: list[str]
    probes: list[tuple]
    frames: list[tuple[int, np.ndarray, np.ndarray]]
    final_state: SimState
    dt: float


def run(surface: SimplicialSurface, dual: DualMesh, materials: MaterialField,
        sources: SourceSpec | None, polarization: str, dt: float,
        n_steps: int, probes=(), frame_stride: int | None = None,
        initial_state: SimState | None = None, bc: str = "pec") -> RunResult:
    """Advance ``n_steps`` leapfrog steps, recording probes and frames.

    Probes are ("edge"|"face", cell) pairs sampled after every step; full
    frames (copies of both fields) are kept for step 0 and then every
    ``frame_stride`` steps.  Deterministic for fixed inputs.  A ``dt``
    above the mesh's stability bound is allowed but warned about.
    """
    if dt <= 0.0:
        raise SolverError("dt must be positive")
    if n_steps < 0:
        raise SolverError("n_steps must be nonnegative")
    limit = cfl_dt(surface, dual, materials.wave_speed)
    if dt > limit:
        warnings.warn(
            f"dt={dt:.6g} exceeds the stability bound {limit:.6g}; "
            f"expect blowup", RuntimeWarning, stacklevel=2,
        )

    probes = list(probes)
    for kind, cell in probes:
        n = surface.n_edges if kind == "edge" else surface.n_faces
        if kind not in ("edge", "face") or not 0 <= cell < n:
            raise SolverError(f"invalid probe ({kind}, {cell})")
    labels = [f"{kind}:{cell}" for kind, cell in probes]

    if initial_state is None:
        state = SimState.zeros(surface, polarization, dt)
    else:
        state = initial_state
        if state.dt != dt or state.polarization != polarization:
            raise SolverError("initial state disagrees with run parameters")

    frames = [(state.step, state.edge.copy(), state.face.copy())]
    rows = []
    first_step = state.step
    for k in range(1, n_steps + 1):
        state = step(surface, dual, state, materials, sources, bc)
        if not (np.isfinite(state.edge).all() and np.isfinite(state.face).all()):
            raise InstabilityError(state.step)
        values = [
            state.edge[cell] if kind == "edge" else state.face[cell]
            for kind, cell in probes
        ]
        rows.append((state.step, state.step * dt, *values))
        if frame_stride is not None and k % frame_stride == 0:
            frames.append((state.step, state.edge.copy(), state.face.copy()))

    return RunResult(
        probe_labels=labels, probes=rows, frames=frames,
        final_state=state, dt=dt,
    )
