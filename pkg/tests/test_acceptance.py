"""Acceptance gate: one test per criterion, at the stated tolerances.

Each test prints a single PASS/FAIL line (run with ``pytest -s`` to see
them inline) and asserts both the numerical tolerance and the runtime
budget of its criterion.
"""

import time

import numpy as np
import pytest

import decmaxwell as dm
from decmaxwell import io as dio, meshgen, solver, spacetime as st, validation as val
from decmaxwell.solver import GaussianPulse, MaterialField, SimState, SourceSpec


def report(number, ok, detail):
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    assert ok, line


def test_criterion_1_exact_cochain_complex():
    t0 = time.perf_counter()
    random_tri = meshgen.random_triangulation(108, seed=2)
    icosphere = meshgen.icosphere(2)
    assert 180 <= random_tri.n_faces <= 220
    worst = 0
    for surface in (random_tri, icosphere):
        dd = (surface.boundary1 @ surface.boundary2).count_nonzero()
        ddt = (surface.d1 @ surface.d0).count_nonzero()
        worst = max(worst, dd, ddt)
    elapsed = time.perf_counter() - t0
    report(1, worst == 0 and elapsed < 1.0,
           f"boundary compositions have {worst} nonzeros "
           f"({random_tri.n_faces}-face triangulation + icosphere), {elapsed:.2f}s")


def test_criterion_2_yee_reduction():
    t0 = time.perf_counter()
    worst = max(
        val.yee_equivalence(n, 1.0, polarization=pol)
        for n in (8, 32) for pol in ("TE", "TM")
    )
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-12 and elapsed < 1.0,
           f"max Yee coefficient deviation {worst:.3e}, {elapsed:.2f}s")


def test_criterion_3_cfl_correctness():
    t0 = time.perf_counter()
    h, c = 0.37, 1.3
    grid = meshgen.square_grid(8, h)
    gdual = dm.build_dual(grid)
    got = solver.cfl_dt(grid, gdual, c)
    square_ok = abs(got - h / (c * np.sqrt(2))) <= 1e-12 * got

    a = 0.83
    equi = meshgen.equilateral_patch(6, 6, a)
    edual = dm.build_dual(equi)
    got_e = solver.cfl_dt(equi, edual, c)
    equi_ok = abs(got_e - a / (c * np.sqrt(6))) <= 1e-12 * got_e

    g32 = meshgen.square_grid(32, 1.0)
    g32d = dm.build_dual(g32)
    oracle = solver.spectral_dt_oracle(g32, g32d)
    bound = solver.cfl_dt(g32, g32d)
    oracle_ok = abs(oracle - bound) / bound <= 0.05

    probe_mesh = meshgen.equilateral_patch(10, 10, 1.0)
    probe_dual = dm.build_dual(probe_mesh)
    probes = val.stability_probe(probe_mesh, probe_dual, [0.99, 1.5], n_steps=10_000)
    probe_ok = probes[0.99] and not probes[1.5]

    elapsed = time.perf_counter() - t0
    report(3, square_ok and equi_ok and oracle_ok and probe_ok and elapsed < 30.0,
           f"square {got:.12g} vs h/(c sqrt2), equilateral {got_e:.12g} vs "
           f"a/(c sqrt6), oracle/bound {oracle / bound:.6f}, probe "
           f"{{0.99: {probes[0.99]}, 1.5: {probes[1.5]}}}, {elapsed:.1f}s")


def test_criterion_4_divergence_preservation():
    t0 = time.perf_counter()
    ico = meshgen.icosphere(1)
    r_te = val.divergence_preservation(ico, dm.build_dual(ico), "TE", 10_000)
    grid = meshgen.square_grid(12, 1.0 / 12)
    r_tm = val.divergence_preservation(grid, dm.build_dual(grid), "TM", 10_000)
    worst = max(r_te, r_tm)
    elapsed = time.perf_counter() - t0
    report(4, worst <= 1e-12 and elapsed < 30.0,
           f"max relative Gauss residual over 10^4 steps {worst:.3e} "
           f"(icosphere TE {r_te:.2e}, grid TM {r_tm:.2e}), {elapsed:.1f}s")


def test_criterion_5_variational_gauge_structure():
    t0 = time.perf_counter()
    ico = meshgen.icosphere(1)
    dual = dm.build_dual(ico)
    dt = 0.5 * solver.cfl_dt(ico, dual)
    prism = st.build_prism(ico, dual, 6, dt)
    rng = np.random.default_rng(42)

    a_int = st.SpacetimeForm(1, rng.integers(-9, 9, prism.n_edges).astype(float))
    df = st.exterior_derivative(prism, st.curvature(prism, a_int))
    bianchi_exact = np.all(df.values == 0.0)

    worst_gauge = 0.0
    for k in range(100):
        a = st.SpacetimeForm(1, rng.standard_normal(prism.n_edges))
        f = st.SpacetimeForm(0, rng.standard_normal(prism.n_vertices))
        j = st.divergence_free_current(prism, seed=1000 + k)
        l0 = st.lagrangian(prism, a, j)
        l1 = st.lagrangian(prism, st.gauge_transform(prism, a, f), j)
        worst_gauge = max(worst_gauge, abs(l1 - l0) / max(abs(l0), 1.0))
    gauge_ok = worst_gauge <= 1e-10

    a = st.SpacetimeForm(1, rng.standard_normal(prism.n_edges))
    j = st.divergence_free_current(prism, seed=77)
    res = st.source_residual(prism, st.curvature(prism, a), j)
    step = 1e-6
    worst_fd = 0.0
    for e in rng.choice(prism.n_edges, 20, replace=False):
        up = a.values.copy(); up[e] += step
        dn = a.values.copy(); dn[e] -= step
        fd = (st.lagrangian(prism, st.SpacetimeForm(1, up), j)
              - st.lagrangian(prism, st.SpacetimeForm(1, dn), j)) / (2 * step)
        expect = -res.values[e]
        worst_fd = max(worst_fd, abs(fd - expect) / max(abs(fd), abs(expect), 1e-9))
    fd_ok = worst_fd <= 1e-5

    elapsed = time.perf_counter() - t0
    report(5, bianchi_exact and gauge_ok and fd_ok and elapsed < 10.0,
           f"dF=0 exact {bianchi_exact}, gauge shift {worst_gauge:.3e} over "
           f"100 draws, FD-gradient mismatch {worst_fd:.3e} over 20 edges, "
           f"{elapsed:.1f}s")


def test_criterion_6_accuracy_claims():
    t0 = time.perf_counter()
    quad = val.convergence_study("TE", "uniform-quad", (1, 1),
                                 resolutions=(8, 16, 32, 64))
    tri = val.convergence_study("TM", "unstructured-tri", (1, 1),
                                resolutions=(4, 8, 16))
    quad_ok = abs(quad.observed_order - 2.0) <= 0.2
    tri_ok = tri.observed_order >= 0.8
    elapsed = time.perf_counter() - t0
    report(6, quad_ok and tri_ok and elapsed < 120.0,
           f"quad order {quad.observed_order:.3f} (want 2.0 +/- 0.2), acute "
           f"jittered-triangle order {tri.observed_order:.3f} (want >= 0.8), "
           f"{elapsed:.1f}s")


def test_criterion_7_energy_behavior():
    t0 = time.perf_counter()
    ico = meshgen.icosphere(1)
    dual = dm.build_dual(ico)
    materials = MaterialField.uniform(ico, "TE")
    dt = 0.5 * solver.cfl_dt(ico, dual)
    rng = np.random.default_rng(3)
    state = SimState.zeros(ico, "TE", dt)
    state.edge[:] = rng.standard_normal(ico.n_edges)
    state.face[:] = rng.standard_normal(ico.n_faces)

    # lossless: the conserved leapfrog quadratic form stays in a tight band
    values = []
    cur = state
    for _ in range(10_000):
        nxt = solver.te_step(ico, dual, cur, materials)
        values.append(solver.leapfrog_invariant(cur, nxt, materials, dual))
        cur = nxt
    values = np.asarray(values)
    band = (values.max() - values.min()) / abs(values.mean())
    band_ok = band <= 1e-8

    # conducting everywhere: monotone non-increasing
    lossy = MaterialField.uniform(ico, "TE", sigma=0.2, sigma_m=0.1)
    cur = SimState.zeros(ico, "TE", dt)
    cur.edge[:] = state.edge
    cur.face[:] = state.face
    monotone = True
    prev = None
    for _ in range(10_000):
        nxt = solver.te_step(ico, dual, cur, lossy)
        inv = solver.leapfrog_invariant(cur, nxt, lossy, dual)
        if prev is not None and inv > prev * (1 + 1e-12):
            monotone = False
            break
        prev = inv
        cur = nxt

    elapsed = time.perf_counter() - t0
    report(7, band_ok and monotone and elapsed < 30.0,
           f"lossless invariant band {band:.3e} over 10^4 steps, lossy run "
           f"monotone {monotone}, {elapsed:.1f}s")


def test_criterion_8_cross_module_consistency():
    t0 = time.perf_counter()
    ico = meshgen.icosphere(1)
    dual = dm.build_dual(ico)
    materials = MaterialField.uniform(ico, "TE")
    dt = 0.5 * solver.cfl_dt(ico, dual)
    n_slices = 8
    prism = st.build_prism(ico, dual, n_slices, dt)

    rng = np.random.default_rng(5)
    state = SimState.zeros(ico, "TE", dt)
    state.face[:] = rng.standard_normal(ico.n_faces)
    states = [state]
    for _ in range(n_slices - 1):
        states.append(solver.te_step(ico, dual, states[-1], materials))

    f = st.embed_te_trajectory(prism, states)
    scale = np.abs(f.values).max()
    bianchi = np.abs(st.exterior_derivative(prism, f).values).max() / scale
    j0 = st.SpacetimeForm(1, np.zeros(prism.n_edges))
    residual = st.source_residual(prism, f, j0).values
    interior = prism.interior_edge_ids()
    source = np.abs(residual[interior]).max() / scale

    elapsed = time.perf_counter() - t0
    report(8, bianchi <= 1e-11 and source <= 1e-11 and elapsed < 10.0,
           f"embedded trajectory: Bianchi {bianchi:.3e}, interior source "
           f"residual {source:.3e} (scale-relative), {elapsed:.1f}s")


def test_criterion_9_pipeline_demo(tmp_path):
    t0 = time.perf_counter()
    ico = meshgen.icosphere(2)
    dual = dm.build_dual(ico)
    materials = MaterialField.uniform(ico, "TE")
    dt = 0.99 * solver.cfl_dt(ico, dual)
    sources = SourceSpec(pulses=(
        GaussianPulse(cell=0, amplitude=1.0, t0=30 * dt, tau=8 * dt, target="face"),
    ))

    def pipeline(tag):
        result = solver.run(ico, dual, materials, sources, "TE", dt, 5000,
                            probes=[("face", 0), ("edge", 17)], frame_stride=1000)
        path = tmp_path / f"probes_{tag}.csv"
        dio.write_probes_csv(path, result.probe_labels, result.probes)
        return result, path

    r1, p1 = pipeline("a")
    r2, p2 = pipeline("b")

    finite = (np.isfinite(r1.final_state.edge).all()
              and np.isfinite(r1.final_state.face).all())
    energies = [solver.energy(SimState(polarization="TE", edge=e, face=f,
                                       step=s, dt=dt), materials, dual)
                for s, e, f in r1.frames[1:]]
    bounded = 0.0 < max(energies) < 1e6
    identical = p1.read_bytes() == p2.read_bytes()

    elapsed = time.perf_counter() - t0
    report(9, finite and bounded and identical and elapsed < 60.0,
           f"5000 steps on the icosphere: finite {finite}, energy bounded "
           f"{bounded} (max {max(energies):.3e}), probe CSV byte-identical "
           f"{identical}, {elapsed:.1f}s")
