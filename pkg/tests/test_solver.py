import numpy as np
import pytest

import decmaxwell as dm
from decmaxwell import meshgen, solver
from decmaxwell.solver import (
    GaussianPulse,
    InstabilityError,
    MaterialField,
    SimState,
    SolverError,
    SourceSpec,
)

SQRT3 = np.sqrt(3.0)


def vacuum(surface, pol):
    return MaterialField.uniform(surface, pol)


def random_state(surface, pol, dt, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    state = SimState.zeros(surface, pol, dt)
    state.edge[:] = scale * rng.standard_normal(surface.n_edges)
    state.face[:] = scale * rng.standard_normal(surface.n_faces)
    return state


# ---------------------------------------------------------------- cfl

def test_cfl_square_grid(grid12):
    surface, dual = grid12
    h = 1.0 / 12
    for c in (1.0, 3.0e8):
        expect = h / (c * np.sqrt(2.0))
        assert abs(solver.cfl_dt(surface, dual, c) - expect) <= 1e-12 * expect


def test_cfl_equilateral_mesh():
    surface = meshgen.equilateral_patch(6, 6, a=0.7)
    dual = dm.build_dual(surface)
    expect = 0.7 / np.sqrt(6.0)
    assert abs(solver.cfl_dt(surface, dual) - expect) <= 1e-12 * expect


def test_cfl_scales_with_mesh():
    a = meshgen.equilateral_patch(4, 4, a=1.0)
    b = meshgen.equilateral_patch(4, 4, a=2.5)
    ratio = solver.cfl_dt(b, dm.build_dual(b)) / solver.cfl_dt(a, dm.build_dual(a))
    assert ratio == pytest.approx(2.5, rel=1e-14)


def test_spectral_oracle_agrees_with_cfl():
    surface = meshgen.square_grid(32, 1.0)
    dual = dm.build_dual(surface)
    oracle = solver.spectral_dt_oracle(surface, dual)
    bound = solver.cfl_dt(surface, dual)
    assert abs(oracle - bound) / bound < 0.05


def test_spectral_oracle_single_face(single_equilateral):
    surface, dual = single_equilateral
    dt = solver.spectral_dt_oracle(surface, dual)
    assert np.isfinite(dt) and dt > 0


def test_spectral_oracle_scaling():
    a = meshgen.equilateral_patch(5, 5, a=1.0)
    b = meshgen.equilateral_patch(5, 5, a=4.0)
    da = solver.spectral_dt_oracle(a, dm.build_dual(a))
    db = solver.spectral_dt_oracle(b, dm.build_dual(b))
    assert abs(db / da - 4.0) < 1e-6 * 4.0


# ---------------------------------------------------------------- stepping

def test_zero_state_stays_zero(icosphere1):
    surface, dual = icosphere1
    for pol, stepper in (("TE", solver.te_step), ("TM", solver.tm_step)):
        state = SimState.zeros(surface, pol, 0.01)
        out = stepper(surface, dual, state, vacuum(surface, pol))
        assert np.all(out.edge == 0.0) and np.all(out.face == 0.0)
        assert out.step == 1


def test_te_single_face_flux_update(single_equilateral):
    surface, dual = single_equilateral
    dt = 0.05
    state = SimState.zeros(surface, "TE", dt)
    eids = surface.face_edges[0]
    state.edge[eids] = surface.face_edge_signs[0]  # unit E along the loop
    out = solver.te_step(surface, dual, state, vacuum(surface, "TE"), bc="none")
    expect = -dt * 3.0 / (SQRT3 / 4.0)
    assert out.face[0] == pytest.approx(expect, rel=1e-14)
    # H was zero, so E is untouched by the half update
    assert np.allclose(out.edge, state.edge)


def test_tm_single_interior_edge_update(equilateral_pair):
    surface, dual = equilateral_pair
    dt = 0.03
    state = SimState.zeros(surface, "TM", dt)
    state.face[0] = 1.0
    out = solver.tm_step(surface, dual, state, vacuum(surface, "TM"))
    e = [i for i in range(surface.n_edges) if i not in surface.boundary_edges][0]
    sign = surface.boundary2[e, 0]
    expect = -dt * sign * (1.0 - 0.0) / dual.dual_edge_lengths[e]
    assert out.edge[e] == pytest.approx(expect, rel=1e-14)


def test_yee_coefficients_on_square_grid(grid12):
    # one step of the assembled scheme against hand-built Yee updates
    surface, dual = grid12
    h = 1.0 / 12
    dt = 0.4 * solver.cfl_dt(surface, dual)
    state = random_state(surface, "TE", dt, seed=10, scale=0.1)
    state.edge[surface.boundary_edges] = 0.0
    out = solver.te_step(surface, dual, state, vacuum(surface, "TE"))
    interior = ~surface.boundary_edge_mask
    manual_edge = state.edge + dt * (surface.boundary2 @ state.face) / h
    assert np.allclose(out.edge[interior], manual_edge[interior], rtol=1e-12)
    circ = surface.d1 @ (out.edge * h)
    manual_face = state.face - dt * circ / h**2
    assert np.allclose(out.face, manual_face, rtol=1e-12)


def test_polarization_mismatch_rejected(icosphere1):
    surface, dual = icosphere1
    state = SimState.zeros(surface, "TM", 0.01)
    with pytest.raises(SolverError):
        solver.te_step(surface, dual, state, vacuum(surface, "TE"))


def test_step_linearity(icosphere1):
    surface, dual = icosphere1
    dt = 0.5 * solver.cfl_dt(surface, dual)
    materials = vacuum(surface, "TE")
    state = random_state(surface, "TE", dt, seed=11)
    scaled = SimState(polarization="TE", edge=3.0 * state.edge,
                      face=3.0 * state.face, step=0, dt=dt)
    out = solver.te_step(surface, dual, state, materials)
    out3 = solver.te_step(surface, dual, scaled, materials)
    assert np.abs(out3.edge - 3.0 * out.edge).max() <= 1e-13 * np.abs(out.edge).max()
    assert np.abs(out3.face - 3.0 * out.face).max() <= 1e-13 * np.abs(out.face).max()


def test_time_reversal(grid12):
    surface, dual = grid12
    materials = vacuum(surface, "TM")
    dt = 0.6 * solver.cfl_dt(surface, dual)
    initial = random_state(surface, "TM", dt, seed=12)
    cur = initial
    for _ in range(200):
        cur = solver.tm_step(surface, dual, cur, materials)
    for _ in range(200):
        cur = solver.step_reversed(surface, dual, cur, materials)
    scale = max(np.abs(initial.edge).max(), np.abs(initial.face).max())
    assert np.abs(cur.edge - initial.edge).max() <= 1e-10 * scale
    assert np.abs(cur.face - initial.face).max() <= 1e-10 * scale


def test_lossy_coefficients_explicit_form(single_equilateral):
    surface, dual = single_equilateral
    dt = 0.01
    materials = MaterialField.uniform(surface, "TE", epsilon=2.0, mu=3.0,
                                      sigma=0.5, sigma_m=0.25)
    state = SimState.zeros(surface, "TE", dt)
    state.edge[:] = 1.0
    state.face[:] = 4.0
    out = solver.te_step(surface, dual, state, materials, bc="none")
    c1 = (2.0 / dt - 0.25) / (2.0 / dt + 0.25)
    rhs = (surface.boundary2 @ state.face) / dual.dual_edge_lengths
    expect_edge = c1 * state.edge + rhs / (2.0 / dt + 0.25)
    assert np.allclose(out.edge, expect_edge, rtol=1e-13)
    c1f = (3.0 / dt - 0.125) / (3.0 / dt + 0.125)
    circ = surface.d1 @ (out.edge * dual.edge_lengths)
    expect_face = c1f * state.face - (circ / dual.face_areas) / (3.0 / dt + 0.125)
    assert np.allclose(out.face, expect_face, rtol=1e-13)


# ---------------------------------------------------------------- sources

def test_gaussian_pulse_values():
    pulse = GaussianPulse(cell=0, amplitude=2.5, t0=1.0, tau=0.2, target="face")
    assert pulse.value(1.0) == 2.5
    assert pulse.value(1.0 + 6 * 0.2) < 2.5e-7
    assert GaussianPulse(0, 0.0, 1.0, 0.2).value(1.0) == 0.0


def test_apply_gaussian_source(single_equilateral):
    surface, _ = single_equilateral
    spec = SourceSpec(pulses=(GaussianPulse(0, 1.0, 0.0, 0.5, "edge"),))
    j_edge, j_face = solver.apply_gaussian_source(spec, 0.0, surface.n_edges,
                                                  surface.n_faces)
    assert j_edge[0] == 1.0 and np.all(j_face == 0.0)
    bad = SourceSpec(pulses=(GaussianPulse(99, 1.0, 0.0, 0.5, "face"),))
    with pytest.raises(SolverError):
        solver.apply_gaussian_source(bad, 0.0, surface.n_edges, surface.n_faces)


def test_pulse_width_must_be_positive():
    with pytest.raises(SolverError):
        GaussianPulse(cell=0, amplitude=1.0, t0=0.0, tau=0.0)


# ---------------------------------------------------------------- diagnostics

def test_energy_zero_and_quadratic(icosphere1):
    surface, dual = icosphere1
    materials = vacuum(surface, "TE")
    zero = SimState.zeros(surface, "TE", 0.01)
    assert solver.energy(zero, materials, dual) == 0.0
    state = random_state(surface, "TE", 0.01, seed=13)
    doubled = SimState(polarization="TE", edge=2 * state.edge,
                       face=2 * state.face, step=0, dt=0.01)
    e1 = solver.energy(state, materials, dual)
    e2 = solver.energy(doubled, materials, dual)
    assert e2 == pytest.approx(4.0 * e1, rel=1e-13)


def test_energy_single_edge_value():
    # interior edge with |e| = 2, |*e| = 1 contributes 1/2 * 1 * 1 * 2 * 1
    surface = meshgen.rectangle_grid(1, 2, hx=2.0, hy=1.0)
    dual = dm.build_dual(surface)
    e = [i for i in range(surface.n_edges) if i not in surface.boundary_edges][0]
    state = SimState.zeros(surface, "TE", 0.01)
    state.edge[e] = 1.0
    assert solver.energy(state, vacuum(surface, "TE"), dual) == pytest.approx(1.0)


def test_divergence_residuals_zero_fields(icosphere1):
    surface, dual = icosphere1
    state = SimState.zeros(surface, "TE", 0.01)
    assert solver.divergence_residuals(surface, dual, state, vacuum(surface, "TE")) == (0.0, 0.0)


def test_divergence_magnetic_trivial_for_exact_flux(icosphere1):
    surface, dual = icosphere1
    rng = np.random.default_rng(14)
    state = SimState.zeros(surface, "TE", 0.01)
    state.face[:] = (surface.d1 @ rng.standard_normal(surface.n_edges)) / dual.face_areas
    mag, _ = solver.divergence_residuals(surface, dual, state, vacuum(surface, "TE"))
    assert mag == 0.0


def test_charge_accumulation_tracks_injected_current(icosphere1):
    # closed surface: injected current must show up as accumulated vertex
    # charge, keeping the Gauss-law residual at the round-off floor
    surface, dual = icosphere1
    materials = vacuum(surface, "TE")
    dt = 0.5 * solver.cfl_dt(surface, dual)
    sources = SourceSpec(pulses=(GaussianPulse(0, 1.0, 5 * dt, 2 * dt, "edge"),))
    state = SimState.zeros(surface, "TE", dt)
    cur = state
    worst = 0.0
    for _ in range(50):
        cur = solver.te_step(surface, dual, cur, materials, sources)
        _, electric = solver.divergence_residuals(surface, dual, cur, materials)
        flux = np.abs(materials.epsilon * cur.edge * dual.dual_edge_lengths).max()
        worst = max(worst, electric / max(flux, 1e-300))
    assert worst <= 1e-12
    assert np.abs(cur.vertex_charge).max() > 0.0


def test_instability_growth_beyond_cfl():
    surface = meshgen.equilateral_patch(8, 8, 1.0)
    dual = dm.build_dual(surface)
    materials = vacuum(surface, "TE")
    dt = 1.5 * solver.cfl_dt(surface, dual)
    state = random_state(surface, "TE", dt, seed=15, scale=1e-3)
    e0 = solver.energy(state, materials, dual)
    cur = state
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(400):
            cur = solver.te_step(surface, dual, cur, materials)
            if not np.isfinite(cur.edge).all():
                break
        efin = solver.energy(cur, materials, dual)
    assert not np.isfinite(efin) or efin > 1e6 * e0


# ---------------------------------------------------------------- run loop

def test_run_zero_steps_echoes_initial(icosphere1):
    surface, dual = icosphere1
    materials = vacuum(surface, "TE")
    dt = 0.5 * solver.cfl_dt(surface, dual)
    result = solver.run(surface, dual, materials, None, "TE", dt, 0,
                        probes=[("face", 0)], frame_stride=10)
    assert len(result.frames) == 1 and result.frames[0][0] == 0
    assert result.probes == []


def test_run_warns_above_cfl(grid12):
    surface, dual = grid12
    materials = vacuum(surface, "TE")
    dt = 1.2 * solver.cfl_dt(surface, dual)
    with pytest.warns(RuntimeWarning):
        solver.run(surface, dual, materials, None, "TE", dt, 0)


def test_run_rejects_bad_probe(grid12):
    surface, dual = grid12
    materials = vacuum(surface, "TE")
    with pytest.raises(SolverError):
        solver.run(surface, dual, materials, None, "TE", 0.01, 1,
                   probes=[("face", surface.n_faces)])


def test_run_reports_instability_step():
    surface = meshgen.equilateral_patch(6, 6, 1.0)
    dual = dm.build_dual(surface)
    materials = vacuum(surface, "TE")
    dt = 2.5 * solver.cfl_dt(surface, dual)
    state = random_state(surface, "TE", dt, seed=16)
    with pytest.warns(RuntimeWarning):
        with pytest.raises(InstabilityError) as err:
            solver.run(surface, dual, materials, None, "TE", dt, 5000,
                       initial_state=state)
    assert err.value.step > 0


def test_run_deterministic(icosphere1):
    surface, dual = icosphere1
    materials = vacuum(surface, "TE")
    dt = 0.9 * solver.cfl_dt(surface, dual)
    sources = SourceSpec(pulses=(GaussianPulse(3, 1.0, 5 * dt, 2 * dt, "face"),))
    kwargs = dict(probes=[("edge", 0), ("face", 7)], frame_stride=20)
    r1 = solver.run(surface, dual, materials, sources, "TE", dt, 100, **kwargs)
    r2 = solver.run(surface, dual, materials, sources, "TE", dt, 100, **kwargs)
    assert r1.probes == r2.probes
    for (s1, e1, f1), (s2, e2, f2) in zip(r1.frames, r2.frames):
        assert s1 == s2 and np.array_equal(e1, e2) and np.array_equal(f1, f2)


def test_material_validation(icosphere1):
    surface, _ = icosphere1
    with pytest.raises(SolverError):
        MaterialField.uniform(surface, "TE", epsilon=0.0)
    with pytest.raises(SolverError):
        MaterialField.uniform(surface, "TE", sigma=-1.0)
    si = MaterialField.uniform(surface, "TE",
                               epsilon=solver.VACUUM_PERMITTIVITY_SI,
                               mu=solver.VACUUM_PERMEABILITY_SI)
    assert si.wave_speed == pytest.approx(2.99792458e8, rel=1e-9)
