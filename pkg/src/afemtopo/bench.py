"""Benchmark presets, key-value configuration files and result writers."""
import csv
import dataclasses
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .adapt import AfemConfig, afem_drive
from .phasefield import OptParams
from .problem import ProblemSpec
from .stokes import PhysParams

TOL = 1e-10


class ConfigError(ValueError):
    pass


# --- presets -------------------------------------------------------------------

def _between(v, lo, hi):
    return (v > lo - TOL) & (v < hi + TOL)


def _everywhere(x, y):
    return np.ones_like(x, dtype=bool)


def left_inflow():
    spec = [
        ("inlet", lambda x, y: x < TOL),
        ("outlet", lambda x, y: (x > 1 - TOL) & _between(y, 0.3, 0.7)),
        ("wall", _everywhere),
    ]
    return ProblemSpec(
        name="left_inflow", extents=((0.0, 1.0), (0.0, 1.0)), nx=37, ny=37,
        xbreaks=(0.3, 0.4, 0.6, 0.7), ybreaks=(0.3, 0.4, 0.6, 0.7),
        boundary_spec=spec, inflow=lambda x, y: np.stack([4 * y * (1 - y), np.zeros_like(y)], axis=-1),
        params=PhysParams(), opt=OptParams(beta=0.5, dt=1e-4),
    )


def _three_inflow_g(x, y):
    # plug profile of unit speed pointing into the domain
    g = np.zeros(np.shape(x) + (2,))
    g[..., 0] = np.where(x < TOL, 1.0, 0.0)
    g[..., 1] = np.where(y < TOL, 1.0, np.where(y > 1 - TOL, -1.0, 0.0))
    return g


def three_inflows():
    mid = lambda v: _between(v, 0.4, 0.6)
    spec = [
        ("inlet", lambda x, y: ((x < TOL) & mid(y)) | ((y < TOL) & mid(x)) | ((y > 1 - TOL) & mid(x))),
        ("outlet", lambda x, y: (x > 1 - TOL) & mid(y)),
        ("wall", _everywhere),
    ]
    return ProblemSpec(
        name="three_inflows", extents=((0.0, 1.0), (0.0, 1.0)), nx=37, ny=37,
        xbreaks=(0.3, 0.4, 0.6, 0.7), ybreaks=(0.3, 0.4, 0.6, 0.7),
        boundary_spec=spec, inflow=_three_inflow_g,
        params=PhysParams(), opt=OptParams(beta=0.36, dt=5e-5),
    )


def bypass():
    ports = lambda y: _between(np.abs(y), 0.15, 0.35)
    spec = [
        ("inlet", lambda x, y: (x < TOL) & ports(y)),
        ("outlet", lambda x, y: (x > 1.5 - TOL) & ports(y)),
        ("wall", _everywhere),
    ]
    g = lambda x, y: np.stack([-100 * (y ** 2 - 0.35 ** 2) * (y ** 2 - 0.15 ** 2), np.zeros_like(y)], axis=-1)
    return ProblemSpec(
        name="bypass", extents=((0.0, 1.5), (-0.5, 0.5)), nx=56, ny=37,
        ybreaks=(-0.35, -0.15, 0.15, 0.35),
        boundary_spec=spec, inflow=g,
        params=PhysParams(epsilon=5e-3, gamma=0.1),
        # with dt = 5e-3 an explicit penalty step loses stability once zeta*|Omega| > 2/dt + 2S/eps
        opt=OptParams(beta=0.7 / 1.5, dt=5e-3, s_tilde=1.0, zeta0=50.0, implicit_volume=True),
    )


PRESETS = {"left_inflow": left_inflow, "three_inflows": three_inflows, "bypass": bypass}


def preset(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None


# --- configuration files -----------------------------------------------------------

_PHYS = {f.name for f in dataclasses.fields(PhysParams)} - {"body_force"}
_OPT = {f.name for f in dataclasses.fields(OptParams)}
_AFEM = {f.name for f in dataclasses.fields(AfemConfig)} - {"level_opt"}
_SPEC = {"nx", "ny", "initial", "initial_value", "mask_file"}
KEYS = {"preset"} | _PHYS | _OPT | _AFEM | _SPEC


def _parse_value(text):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", ""):
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _coerce(key, value, default):
    if value is None or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    return value


def parse_config(text, source="<config>"):
    """Parse ``key = value`` lines into a dict; ``#`` starts a comment."""
    out = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{no}: missing key")
        if key not in KEYS:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{no}: duplicate key {key!r}")
        out[key] = _parse_value(value)
    return out


def read_mask(path):
    """Fluid mask from a file of axis-aligned rectangles ``x0 x1 y0 y1``, one per line."""
    rects = []
    for no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        try:
            x0, x1, y0, y1 = map(float, line)
        except ValueError:
            raise ConfigError(f"{path}:{no}: expected four numbers 'x0 x1 y0 y1'") from None
        rects.append((x0, x1, y0, y1))

    def mask(x, y):
        inside = np.zeros(np.shape(x), dtype=bool)
        for x0, x1, y0, y1 in rects:
            inside |= _between(x, x0, x1) & _between(y, y0, y1)
        return inside
    return mask


def build_from_dict(values, base_dir=Path(".")):
    """Preset plus overrides -> ``(ProblemSpec, AfemConfig)``."""
    values = dict(values)
    name = values.pop("preset", None)
    if name is None:
        raise ConfigError("preset: missing (one of " + ", ".join(sorted(PRESETS)) + ")")
    try:
        spec = preset(name)
    except KeyError as exc:
        raise ConfigError(f"preset: {exc.args[0]}") from None
    phys, opt, afem, sp = {}, {}, {}, {}
    defaults_phys, defaults_opt, defaults_afem = PhysParams(), spec.opt, AfemConfig()
    for key, value in values.items():
        if key in _PHYS:
            phys[key] = _coerce(key, value, getattr(defaults_phys, key))
        elif key in _OPT:
            opt[key] = _coerce(key, value, getattr(defaults_opt, key))
        elif key in _AFEM:
            afem[key] = _coerce(key, value, getattr(defaults_afem, key))
        elif key == "mask_file":
            sp["mask"] = read_mask(base_dir / str(value))
            sp.setdefault("initial", "mask")
        else:
            sp[key] = _coerce(key, value, getattr(spec, key))
    try:
        params = replace(spec.params, **phys)
    except ValueError as exc:
        raise ConfigError(_name_field(exc, phys)) from None
    try:
        opt_params = replace(spec.opt, **opt)
    except ValueError as exc:
        raise ConfigError(_name_field(exc, opt)) from None
    try:
        cfg = AfemConfig(**afem)
    except ValueError as exc:
        raise ConfigError(_name_field(exc, afem)) from None
    try:
        spec = replace(spec, params=params, opt=opt_params, **sp)
    except ValueError as exc:
        raise ConfigError(_name_field(exc, sp)) from None
    return spec, cfg


def _name_field(exc, group):
    msg = str(exc)
    if any(msg.startswith(k) for k in group):
        return msg
    return f"{'/'.join(sorted(group)) or 'config'}: {msg}"


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    return build_from_dict(parse_config(text, str(path)), base_dir=path.parent)


# --- output ----------------------------------------------------------------------

CSV_HEADER = (
    "level", "outer", "lagrangian", "objective", "brinkman", "dissipation", "body",
    "ginzburg_landau", "W", "ell", "zeta", "eta1", "eta2", "vertices", "seconds",
)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def write_csv_log(report, path):
    """One row per outer iteration under the fixed ``CSV_HEADER``."""
    if not report.history:
        raise ValueError("empty report")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in report.history:
            row = dict(rec, vertices=rec["n_vertices"])
            w.writerow([_fmt(row.get(k)) for k in CSV_HEADER])
    return path


def write_vtk(mesh, path, phi=None, u=None, p=None, eta1=None, eta2=None, title="afemtopo"):
    """Legacy ASCII VTK (v3.0) unstructured grid of triangles.

    ``phi`` is written as point data; the CR velocity (element mean of the
    three edge values), pressure and squared indicators as cell data.
    """
    path = Path(path)
    nV, nT = mesh.n_vertices, mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nV} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.tolist()]
    lines.append(f"CELLS {nT} {4 * nT}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.elements.tolist()]
    lines.append(f"CELL_TYPES {nT}")
    lines += ["5"] * nT
    if phi is not None:
        lines += [f"POINT_DATA {nV}", "SCALARS phi double 1", "LOOKUP_TABLE default"]
        lines += [repr(v) for v in np.asarray(phi, float).tolist()]
    cell = []
    if u is not None:
        um = np.asarray(u)[mesh.elem_edges].mean(axis=1)
        cell += ["VECTORS velocity double"] + [f"{a!r} {b!r} 0.0" for a, b in um.tolist()]
    for name, vals in (("pressure", p), ("eta1", eta1), ("eta2", eta2)):
        if vals is not None:
            vals = getattr(vals, "eta_sq", vals)
            cell += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            cell += [repr(v) for v in np.asarray(vals, float).tolist()]
    if cell:
        lines += [f"CELL_DATA {nT}"] + cell
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_points(path):
    """Point coordinates and triangles of a legacy ASCII file written by ``write_vtk``."""
    tokens = Path(path).read_text().split("\n")
    i = next(k for k, t in enumerate(tokens) if t.startswith("POINTS"))
    n = int(tokens[i].split()[1])
    pts = np.array([[float(v) for v in tokens[i + 1 + k].split()] for k in range(n)])
    j = next(k for k, t in enumerate(tokens) if t.startswith("CELLS"))
    m = int(tokens[j].split()[1])
    cells = np.array([[int(v) for v in tokens[j + 1 + k].split()[1:]] for k in range(m)])
    return pts, cells


def write_report(report, out_dir, prefix):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv_log(report, out_dir / f"{prefix}_history.csv")
    write_vtk(report.mesh, out_dir / f"{prefix}_final.vtk", phi=report.phi, u=report.u, p=report.p,
              eta1=report.eta1, eta2=report.eta2)
    with (out_dir / f"{prefix}_levels.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("level", "vertices", "elements", "lagrangian", "objective", "W", "eta1", "eta2",
                    "marked", "band_fraction", "seconds"))
        for r in report.levels:
            w.writerow([r.level, r.n_vertices, r.n_elements, _fmt(r.lagrangian), _fmt(r.objective["objective"]),
                        _fmt(r.W), _fmt(r.eta1), _fmt(r.eta2), r.n_marked, _fmt(r.band_fraction), _fmt(r.seconds)])


# --- adaptive versus uniform ---------------------------------------------------------

@dataclass
class ComparisonRow:
    strategy: str
    vertices: int
    objective: float
    seconds: float


def compare_mode(spec, adaptive_cfg, uniform_cfg=None, log=None):
    """Run both arms; returns ``(rows, reports)``. The uniform arm defaults to K=3."""
    if uniform_cfg is None:
        uniform_cfg = replace(adaptive_cfg, strategy="uniform", K=3)
    rows, reports = [], {}
    for cfg in (adaptive_cfg, uniform_cfg):
        t = time.perf_counter()
        rep = afem_drive(spec, cfg, log=log)
        rows.append(ComparisonRow(cfg.strategy, rep.final.n_vertices, rep.final_objective, time.perf_counter() - t))
        reports.setdefault(cfg.strategy, rep)
    return rows, reports


def format_table(rows):
    out = [f"{'strategy':<10} {'vertices':>9} {'objective':>12} {'time [s]':>10}"]
    out += [f"{r.strategy:<10} {r.vertices:>9d} {r.objective:>12.4f} {r.seconds:>10.1f}" for r in rows]
    return "\n".join(out)
