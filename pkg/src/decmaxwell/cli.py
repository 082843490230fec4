"""Command-line surface: mesh-info, dt, run, validate, convergence.

Exit codes: 0 success, 1 usage error, 2 data error (bad mesh/config or a
failed validation suite), 3 numerical failure (non-finite fields).
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io, meshgen, solver, spacetime, validation
from .mesh import MeshError, build_dual, mesh_quality
from .solver import InstabilityError, MaterialField, SimState, SourceSpec

USAGE_ERROR, DATA_ERROR, NUMERICAL_ERROR = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="decmaxwell",
                     description="Maxwell solver on discrete surfaces (DEC)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh-info", help="mesh quality report")
    p.add_argument("mesh", help="OFF or OBJ file")

    p = sub.add_parser("dt", help="print the stable timestep and its spectral check")
    p.add_argument("mesh")
    p.add_argument("--c", type=float, default=1.0, help="wave speed (default 1)")

    p = sub.add_parser("run", help="run the full simulation pipeline")
    p.add_argument("config", help="TOML run configuration")

    p = sub.add_parser("validate", help="run built-in verification suites")
    p.add_argument("--suite",
                   choices=["yee", "stability", "divergence", "convergence", "gauge"],
                   default=None, help="run one suite (default: all)")
    p.add_argument("--output", default=None, metavar="DIR",
                   help="also write suite tables (CSV) into DIR")

    p = sub.add_parser("convergence", help="convergence study from a TOML config")
    p.add_argument("config")
    return parser


def _cmd_mesh_info(args) -> int:
    surface = io.load_mesh(args.mesh)
    print(mesh_quality(surface))
    return 0


def _cmd_dt(args) -> int:
    surface = io.load_mesh(args.mesh)
    dual = build_dual(surface)
    bound = solver.cfl_dt(surface, dual, args.c)
    oracle = solver.spectral_dt_oracle(surface, dual, args.c)
    print(f"cfl_dt      {bound:.12g}")
    print(f"spectral_dt {oracle:.12g}")
    return 0


def _cmd_run(args) -> int:
    config = io.parse_config(args.config)
    surface = io.load_mesh(config.mesh_path)
    dual = build_dual(surface, strict=not config.lenient)
    materials = io.materials_from_config(config, surface)
    sources = SourceSpec(pulses=tuple(config.pulses))

    limit = solver.cfl_dt(surface, dual, materials.wave_speed)
    dt = config.dt if config.dt is not None else config.cfl_safety * limit

    result = solver.run(
        surface, dual, materials, sources, config.polarization, dt,
        config.n_steps, probes=config.probes,
        frame_stride=config.frame_stride,
    )

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for step, edge, face in result.frames:
        io.write_frame_vtk(out / f"frame_{step:06d}.vtk", surface, edge, face,
                           step=step, time=step * dt, dual=dual)
    io.write_probes_csv(out / "probes.csv", result.probe_labels, result.probes)
    print(f"dt {dt:.12g} (bound {limit:.12g})")
    print(f"steps {config.n_steps}, frames {len(result.frames)}, "
          f"probes {len(result.probe_labels)}")
    print(f"outputs in {out}")
    return 0


def _suite_yee(out=None):
    worst = max(
        validation.yee_equivalence(n, 1.0, polarization=pol)
        for n in (8, 32) for pol in ("TE", "TM")
    )
    return worst <= 1e-12, f"max coefficient deviation {worst:.3g}"


def _suite_stability(out=None):
    surface = meshgen.equilateral_patch(10, 10, 1.0)
    dual = build_dual(surface)
    factors = [0.5, 0.99, 1.5]
    result = validation.stability_probe(surface, dual, factors, n_steps=10000)
    if out is not None:
        with open(out / "stability.csv", "w", newline="\n") as fh:
            fh.write("cfl_factor,stable\n")
            for f in factors:
                fh.write(f"{f},{'stable' if result[f] else 'unstable'}\n")
    ok = result[0.5] and result[0.99] and not result[1.5]
    return ok, f"factor 0.99 {'stable' if result[0.99] else 'unstable'}, " \
               f"1.5 {'stable' if result[1.5] else 'unstable'}"


def _suite_divergence(out=None):
    ico = meshgen.icosphere(1)
    r1 = validation.divergence_preservation(ico, build_dual(ico), "TE", 2000)
    grid = meshgen.square_grid(12, 1.0 / 12)
    r2 = validation.divergence_preservation(grid, build_dual(grid), "TM", 2000)
    worst = max(r1, r2)
    return worst <= 1e-12, f"max relative Gauss residual {worst:.3g}"


def _suite_convergence(out=None):
    quad = validation.convergence_study("TE", "uniform-quad", (1, 1),
                                        resolutions=(8, 16, 32, 64))
    tri = validation.convergence_study("TM", "unstructured-tri", (1, 1),
                                       resolutions=(4, 8, 16))
    if out is not None:
        io.write_convergence_csv(out / "convergence_quad.csv", quad)
        io.write_convergence_csv(out / "convergence_tri.csv", tri)
    ok = abs(quad.observed_order - 2.0) <= 0.2 and tri.observed_order >= 0.8
    return ok, (f"quad order {quad.observed_order:.3f}, "
                f"triangle order {tri.observed_order:.3f}")


def _suite_gauge(out=None):
    ico = meshgen.icosphere(1)
    dual = build_dual(ico)
    materials = MaterialField.uniform(ico, "TE")
    dt = 0.5 * solver.cfl_dt(ico, dual, materials.wave_speed)
    n_slices = 6
    prism = spacetime.build_prism(ico, dual, n_slices, dt)
    rng = np.random.default_rng(0)

    dd = (prism.boundary1 @ prism.boundary2).count_nonzero() \
        + (prism.boundary2 @ prism.boundary3).count_nonzero()

    worst_gauge = 0.0
    for k in range(20):
        a = spacetime.SpacetimeForm(1, rng.standard_normal(prism.n_edges))
        f = spacetime.SpacetimeForm(0, rng.standard_normal(prism.n_vertices))
        j = spacetime.divergence_free_current(prism, seed=k)
        l0 = spacetime.lagrangian(prism, a, j)
        l1 = spacetime.lagrangian(prism, spacetime.gauge_transform(prism, a, f), j)
        worst_gauge = max(worst_gauge, abs(l1 - l0) / max(abs(l0), 1e-30))

    state = SimState.zeros(ico, "TE", dt)
    state.face[:] = rng.standard_normal(ico.n_faces)
    states = [state]
    for _ in range(n_slices - 1):
        states.append(solver.te_step(ico, dual, states[-1], materials))
    femb = spacetime.embed_te_trajectory(prism, states)
    scale = float(np.abs(femb.values).max())
    j0 = spacetime.SpacetimeForm(1, np.zeros(prism.n_edges))
    res = spacetime.source_residual(prism, femb, j0)
    interior = prism.interior_edge_ids()
    worst_el = float(np.abs(res.values[interior]).max()) / scale
    worst_bianchi = float(np.abs(
        spacetime.exterior_derivative(prism, femb).values).max()) / scale

    ok = dd == 0 and worst_gauge <= 1e-10 and worst_el <= 1e-11 \
        and worst_bianchi <= 1e-11
    return ok, (f"d.d nnz {dd}, gauge {worst_gauge:.3g}, "
                f"EL {worst_el:.3g}, Bianchi {worst_bianchi:.3g}")


_SUITES = {
    "yee": _suite_yee,
    "stability": _suite_stability,
    "divergence": _suite_divergence,
    "convergence": _suite_convergence,
    "gauge": _suite_gauge,
}


def _cmd_validate(args) -> int:
    names = [args.suite] if args.suite else list(_SUITES)
    out = None
    if args.output is not None:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
    all_ok = True
    for name in names:
        ok, detail = _SUITES[name](out)
        all_ok &= ok
        print(f"{name:<12} {'PASS' if ok else 'FAIL'}  {detail}")
    return 0 if all_ok else DATA_ERROR


def _cmd_convergence(args) -> int:
    path = Path(args.config)
    if not path.exists():
        raise io.ConfigError(f"{path}: no such file")
    try:
        raw = io.tomllib.loads(path.read_text())
    except io.tomllib.TOMLDecodeError as exc:
        raise io.ConfigError(f"{path}: {exc}") from None

    known = {"convergence", "output"}
    for key in raw:
        if key not in known:
            raise io.ConfigError(f"unknown key '{key}'")
    table = raw.get("convergence", {})
    allowed = {"polarization", "family", "mode", "final_time", "resolutions",
               "cfl_safety", "jitter", "seed"}
    for key in table:
        if key not in allowed:
            raise io.ConfigError(f"unknown key 'convergence.{key}'")
    out_tbl = raw.get("output", {})
    for key in out_tbl:
        if key != "directory":
            raise io.ConfigError(f"unknown key 'output.{key}'")

    report = validation.convergence_study(
        polarization=str(table.get("polarization", "TE")).upper(),
        family=table.get("family", "uniform-quad"),
        mode=tuple(table.get("mode", (1, 1))),
        final_time=float(table.get("final_time", 0.45)),
        resolutions=tuple(table.get("resolutions", (8, 16, 32, 64))),
        safety=float(table.get("cfl_safety", 0.99)),
        jitter=float(table.get("jitter", 0.25)),
        seed=int(table.get("seed", 0)),
    )
    out = Path(out_tbl.get("directory", "out"))
    out.mkdir(parents=True, exist_ok=True)
    io.write_convergence_csv(out / "convergence.csv", report)
    print("\n".join(report.lines()))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR

    handlers = {
        "mesh-info": _cmd_mesh_info,
        "dt": _cmd_dt,
        "run": _cmd_run,
        "validate": _cmd_validate,
        "convergence": _cmd_convergence,
    }
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return handlers[args.command](args)
    except InstabilityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except (MeshError, io.MeshFileError, io.ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
