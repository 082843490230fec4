"""Mesh file ingestion, run configuration and output emission.

Readers: OFF and OBJ meshes, TOML run configuration.  Writers: VTK legacy
ASCII frames (for offline viewers) and CSV probe series.  All numeric
output uses 17 significant digits so files round-trip float64 bit-exactly
and reruns are byte-identical.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .mesh import SimplicialSurface, build_complex
from .solver import TE, TM, GaussianPulse, MaterialField

FMT = "%.17g"


class MeshFileError(ValueError):
    """Malformed or unsupported mesh file."""


class ConfigError(ValueError):
    """Malformed run configuration."""


def _data_lines(path):
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _load_off(path) -> SimplicialSurface:
    lines = _data_lines(path)
    try:
        _, header = next(lines)
    except StopIteration:
        raise MeshFileError(f"{path}: empty file") from None
    if header.upper() != "OFF":
        raise MeshFileError(f"{path}: missing OFF header")
    try:
        _, counts = next(lines)
        n_v, n_f = [int(tok) for tok in counts.split()[:2]]
    except (StopIteration, ValueError):
        raise MeshFileError(f"{path}: malformed counts line") from None

    verts = []
    for _ in range(n_v):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise MeshFileError(f"{path}: truncated vertex list") from None
        toks = line.split()
        if len(toks) < 3:
            raise MeshFileError(f"{path}:{lineno}: vertex needs 3 coordinates")
        try:
            verts.append([float(t) for t in toks[:3]])
        except ValueError:
            raise MeshFileError(f"{path}:{lineno}: bad vertex coordinate") from None

    faces = []
    for _ in range(n_f):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise MeshFileError(f"{path}: truncated face list") from None
        toks = line.split()
        try:
            k = int(toks[0])
            idx = [int(t) for t in toks[1:1 + k]]
        except (ValueError, IndexError):
            raise MeshFileError(f"{path}:{lineno}: bad face record") from None
        if len(idx) != k or k < 3:
            raise MeshFileError(f"{path}:{lineno}: face needs {k} indices")
        if any(i < 0 or i >= n_v for i in idx):
            raise MeshFileError(f"{path}:{lineno}: vertex index out of range")
        faces.append(idx)
    return build_complex(np.asarray(verts), faces)


def _load_obj(path) -> SimplicialSurface:
    verts, faces = [], []
    for lineno, line in _data_lines(path):
        toks = line.split()
        if toks[0] == "v":
            if len(toks) < 4:
                raise MeshFileError(f"{path}:{lineno}: vertex needs 3 coordinates")
            try:
                verts.append([float(t) for t in toks[1:4]])
            except ValueError:
                raise MeshFileError(f"{path}:{lineno}: bad vertex coordinate") from None
        elif toks[0] == "f":
            idx = []
            for tok in toks[1:]:
                try:
                    i = int(tok.split("/")[0])
                except ValueError:
                    raise MeshFileError(f"{path}:{lineno}: bad face index") from None
                if i == 0:
                    raise MeshFileError(f"{path}:{lineno}: OBJ indices are 1-based")
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) < 3:
                raise MeshFileError(f"{path}:{lineno}: face needs 3 vertices")
            faces.append(idx)
        # all other record types (vn, vt, usemtl, ...) are ignored
    for f in faces:
        if any(i < 0 or i >= len(verts) for i in f):
            raise MeshFileError(f"{path}: face index out of range")
    if not faces:
        raise MeshFileError(f"{path}: no faces found")
    return build_complex(np.asarray(verts), faces)


def load_mesh(path) -> SimplicialSurface:
    """Read an OFF or OBJ file into an oriented complex."""
    path = Path(path)
    if not path.exists():
        raise MeshFileError(f"{path}: no such file")
    suffix = path.suffix.lower()
    if suffix == ".off":
        return _load_off(path)
    if suffix == ".obj":
        return _load_obj(path)
    raise MeshFileError(f"{path}: unsupported extension (use .off or .obj)")


@dataclass
class RunConfig:
    """Validated contents of a run configuration file."""

    mesh_path: str
    polarization: str
    n_steps: int
    lenient: bool = False
    unit_system: str = "natural"
    epsilon: float | None = None
    mu: float | None = None
    sigma: float = 0.0
    sigma_m: float = 0.0
    regions: list = field(default_factory=list)
    pulses: list = field(default_factory=list)
    dt: float | None = None
    cfl_safety: float = 0.99
    probes: list = field(default_factory=list)
    frame_stride: int | None = None
    output_dir: str = "out"
    seed: int = 0

    @property
    def epsilon0(self) -> float:
        from .solver import VACUUM_PERMITTIVITY_SI
        if self.epsilon is not None:
            return self.epsilon
        return VACUUM_PERMITTIVITY_SI if self.unit_system == "SI" else 1.0

    @property
    def mu0(self) -> float:
        from .solver import VACUUM_PERMEABILITY_SI
        if self.mu is not None:
            return self.mu
        return VACUUM_PERMEABILITY_SI if self.unit_system == "SI" else 1.0


_MATERIAL_KEYS = ("epsilon", "mu", "sigma", "sigma_m")

_SCHEMA = {
    "mesh": {"path", "lenient"},
    "materials": set(_MATERIAL_KEYS) | {"region"},
    "sources": {"gaussian"},
    "run": {"polarization", "n_steps", "dt", "cfl_safety", "probes",
            "frame_stride", "seed", "unit_system"},
    "output": {"directory"},
}


def _reject_unknown(table, known, where):
    for key in table:
        if key not in known:
            raise ConfigError(f"unknown key '{where}.{key}'" if where else
                              f"unknown key '{key}'")


def _parse_probe(text):
    try:
        kind, cell = text.split(":")
        cell = int(cell)
    except ValueError:
        raise ConfigError(f"probe '{text}' is not 'edge:N' or 'face:N'") from None
    if kind not in ("edge", "face"):
        raise ConfigError(f"probe kind must be 'edge' or 'face', got '{kind}'")
    return kind, cell


def parse_config(path) -> RunConfig:
    """Parse and validate a TOML run configuration.

    Unknown keys are hard errors; every default is documented on
    :class:`RunConfig`.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    _reject_unknown(raw, set(_SCHEMA), "")
    for section, keys in _SCHEMA.items():
        if section in raw:
            if not isinstance(raw[section], dict):
                raise ConfigError(f"section [{section}] must be a table")
            _reject_unknown(raw[section], keys, section)

    mesh = raw.get("mesh", {})
    if "path" not in mesh:
        raise ConfigError("missing required key 'mesh.path'")
    run_tbl = raw.get("run", {})
    for req in ("polarization", "n_steps"):
        if req not in run_tbl:
            raise ConfigError(f"missing required key 'run.{req}'")

    polarization = str(run_tbl["polarization"]).upper()
    if polarization not in (TE, TM):
        raise ConfigError(f"run.polarization must be 'TE' or 'TM'")
    n_steps = int(run_tbl["n_steps"])
    if n_steps < 0:
        raise ConfigError("run.n_steps must be >= 0")
    unit_system = run_tbl.get("unit_system", "natural")
    if unit_system not in ("natural", "SI"):
        raise ConfigError("run.unit_system must be 'natural' or 'SI'")
    dt = run_tbl.get("dt")
    if dt is not None and float(dt) <= 0.0:
        raise ConfigError("run.dt must be positive")
    cfl_safety = float(run_tbl.get("cfl_safety", 0.99))
    if dt is None and not 0.0 < cfl_safety <= 1.0:
        raise ConfigError(
            "run.cfl_safety must lie in (0, 1] unless run.dt overrides it"
        )
    frame_stride = run_tbl.get("frame_stride")
    if frame_stride is not None and int(frame_stride) < 1:
        raise ConfigError("run.frame_stride must be >= 1")
    probes = [_parse_probe(p) for p in run_tbl.get("probes", [])]

    mats = raw.get("materials", {})
    regions = []
    for i, region in enumerate(mats.get("region", [])):
        _reject_unknown(region, set(_MATERIAL_KEYS) | {"box"},
                        f"materials.region[{i}]")
        if "box" not in region or len(region["box"]) != 6:
            raise ConfigError(
                f"materials.region[{i}].box needs [x0, y0, z0, x1, y1, z1]"
            )
        values = {k: float(region[k]) for k in _MATERIAL_KEYS if k in region}
        regions.append(([float(v) for v in region["box"]], values))

    pulses = []
    for i, pulse in enumerate(raw.get("sources", {}).get("gaussian", [])):
        _reject_unknown(pulse, {"cell", "field", "amplitude", "t0", "tau"},
                        f"sources.gaussian[{i}]")
        try:
            pulses.append(GaussianPulse(
                cell=int(pulse["cell"]),
                amplitude=float(pulse["amplitude"]),
                t0=float(pulse["t0"]),
                tau=float(pulse["tau"]),
                target=pulse.get("field", "face"),
            ))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"sources.gaussian[{i}]: {exc}") from None

    return RunConfig(
        mesh_path=str(mesh["path"]),
        lenient=bool(mesh.get("lenient", False)),
        polarization=polarization,
        n_steps=n_steps,
        unit_system=unit_system,
        epsilon=float(mats["epsilon"]) if "epsilon" in mats else None,
        mu=float(mats["mu"]) if "mu" in mats else None,
        sigma=float(mats.get("sigma", 0.0)),
        sigma_m=float(mats.get("sigma_m", 0.0)),
        regions=regions,
        pulses=pulses,
        dt=float(dt) if dt is not None else None,
        cfl_safety=cfl_safety,
        probes=probes,
        frame_stride=int(frame_stride) if frame_stride is not None else None,
        output_dir=str(raw.get("output", {}).get("directory", "out")),
        seed=int(run_tbl.get("seed", 0)),
    )


def materials_from_config(config: RunConfig, surface: SimplicialSurface) -> MaterialField:
    """Per-cell material arrays from background values and box regions."""
    edge_pts = 0.5 * (surface.vertices[surface.edges[:, 0]]
                      + surface.vertices[surface.edges[:, 1]])
    face_pts = np.array([surface.vertices[loop].mean(axis=0)
                         for loop in surface.faces])
    if config.polarization == TE:
        e_pts, h_pts = edge_pts, face_pts
    else:
        e_pts, h_pts = face_pts, edge_pts

    fields = {
        "epsilon": np.full(len(e_pts), config.epsilon0),
        "sigma": np.full(len(e_pts), config.sigma),
        "mu": np.full(len(h_pts), config.mu0),
        "sigma_m": np.full(len(h_pts), config.sigma_m),
    }
    for box, values in config.regions:
        lo, hi = np.asarray(box[:3]), np.asarray(box[3:])
        inside_e = np.all((e_pts >= lo) & (e_pts <= hi), axis=1)
        inside_h = np.all((h_pts >= lo) & (h_pts <= hi), axis=1)
        for key, val in values.items():
            inside = inside_e if key in ("epsilon", "sigma") else inside_h
            fields[key][inside] = val
    return MaterialField(polarization=config.polarization, **fields)


def write_frame_vtk(path, surface: SimplicialSurface, edge_values,
                    face_values, step: int = 0, time: float = 0.0,
                    dual=None) -> None:
    """Write one field frame as legacy VTK ASCII POLYDATA.

    The face field is exported as CELL_DATA; the edge field is averaged
    onto vertices (incident values weighted by edge length) as POINT_DATA,
    a lossy view meant only for display.
    """
    edge_values = np.asarray(edge_values, dtype=float)
    face_values = np.asarray(face_values, dtype=float)
    if dual is not None:
        lengths = dual.edge_lengths
    else:
        vec = surface.vertices[surface.edges[:, 1]] - surface.vertices[surface.edges[:, 0]]
        lengths = np.linalg.norm(vec, axis=1)

    weight = np.zeros(surface.n_vertices)
    accum = np.zeros(surface.n_vertices)
    for (tail, head), value, length in zip(surface.edges, edge_values, lengths):
        for v in (tail, head):
            accum[v] += value * length
            weight[v] += length
    vertex_avg = np.divide(accum, weight, out=np.zeros_like(accum),
                           where=weight > 0)

    with open(path, "w", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"decmaxwell frame step={step} time={FMT % time}\n")
        fh.write("ASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {surface.n_vertices} double\n")
        for x, y, z in surface.vertices:
            fh.write(f"{FMT % x} {FMT % y} {FMT % z}\n")
        size = sum(len(loop) + 1 for loop in surface.faces)
        fh.write(f"POLYGONS {surface.n_faces} {size}\n")
        for loop in surface.faces:
            fh.write(" ".join([str(len(loop))] + [str(int(v)) for v in loop]) + "\n")
        fh.write(f"CELL_DATA {surface.n_faces}\n")
        fh.write("SCALARS face_field double 1\nLOOKUP_TABLE default\n")
        for value in face_values:
            fh.write(FMT % value + "\n")
        fh.write(f"POINT_DATA {surface.n_vertices}\n")
        fh.write("SCALARS edge_field_vertex_avg double 1\nLOOKUP_TABLE default\n")
        for value in vertex_avg:
            fh.write(FMT % value + "\n")


def write_probes_csv(path, probe_labels, rows) -> None:
    """Probe series as CSV: header ``step,time,<labels>``, one row per step."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(["step", "time"] + list(probe_labels)) + "\n")
        for row in rows:
            step, time, *values = row
            cells = [str(int(step)), FMT % time] + [FMT % v for v in values]
            fh.write(",".join(cells) + "\n")


def write_convergence_csv(path, report) -> None:
    """ConvergenceReport as CSV with a trailing observed-order record."""
    with open(path, "w", newline="\n") as fh:
        fh.write("spacing,l2_error\n")
        for h, e in zip(report.resolutions, report.errors):
            fh.write(f"{FMT % h},{FMT % e}\n")
        fh.write(f"observed_order,{FMT % report.observed_order}\n")
