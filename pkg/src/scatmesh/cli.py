"""Command-line driver: forward synthesis, mesh-size maps, grids and reconstructions.

Every command reads one JSON experiment config (``--config``) and writes
CSV/JSON data plus gnuplot scripts into ``--out``.  ``preset <name>`` runs
the shipped configs, each a list of runs with their own pipeline.  Outputs
contain no timestamps or timings, so identical configs give identical files;
diagnostics go to standard error.
"""

import argparse
import hashlib
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import forward as fw
from . import meshgen as mg
from . import meshsize as ms
from . import recon as rc
from .errors import PreconditionError, ProvenanceError, ScatMeshError
from .geometry import Box, ContrastField, Grid, Illumination, MeasurementSurface, WaveContext

PRESETS = ("fig3", "fig4", "fig5", "fig6", "fig7")
COMPONENT_LEVEL = 0.7


class ConfigError(ScatMeshError, ValueError):
    """Invalid experiment config; the message starts with the field path."""


# ----------------------------------------------------------------- config


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def _get(d, key, path, default=..., kind=None):
    if not isinstance(d, dict):
        _fail(path, "expected an object")
    if key not in d:
        if default is ...:
            _fail(f"{path}.{key}", "missing")
        return default
    val = d[key]
    p = f"{path}.{key}"
    if kind == "num":
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            _fail(p, f"expected a finite number, got {val!r}")
        return float(val)
    if kind == "int":
        if isinstance(val, bool) or not isinstance(val, int):
            _fail(p, f"expected an integer, got {val!r}")
        return val
    if kind == "vec":
        arr = np.asarray(val, float) if isinstance(val, list) else None
        if arr is None or arr.ndim != 1 or not np.all(np.isfinite(arr)):
            _fail(p, f"expected a list of numbers, got {val!r}")
        return arr
    if kind == "str" and not isinstance(val, str):
        _fail(p, f"expected a string, got {val!r}")
    return val


def _wrap(path, fn, *args, **kw):
    """Re-raise module validation errors with the config path attached."""
    try:
        return fn(*args, **kw)
    except (ScatMeshError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        _fail(path, str(exc))


def _parse_surface(d, path, dim):
    kind = _get(d, "type", path, kind="str")
    if kind == "circle":
        s = _wrap(
            path,
            MeasurementSurface.circle,
            _get(d, "n", path, kind="int"),
            _get(d, "radius", path, kind="num"),
            tuple(_get(d, "center", path, [0.0, 0.0], "vec")),
        )
    elif kind == "ellipse":
        s = _wrap(
            path,
            MeasurementSurface.ellipse,
            _get(d, "n", path, kind="int"),
            _get(d, "a", path, kind="num"),
            _get(d, "b", path, kind="num"),
            tuple(_get(d, "center", path, [0.0, 0.0], "vec")),
        )
    elif kind == "sphere":
        s = _wrap(path, MeasurementSurface.sphere, _get(d, "n", path, kind="int"), _get(d, "radius", path, kind="num"))
    elif kind == "points":
        pts = _get(d, "points", path)
        w = _get(d, "weights", path, None)
        s = _wrap(path, MeasurementSurface, np.asarray(pts, float), None if w is None else np.asarray(w, float))
    else:
        _fail(f"{path}.type", f"unknown surface type {kind!r}")
    if s.dim != dim:
        _fail(path, f"surface dimension {s.dim} does not match M = {dim}")
    return s


def _parse_illumination(d, path):
    kind = _get(d, "kind", path, "plane", "str")
    if kind == "plane":
        if "angle" in d:
            return Illumination.plane_angle(_get(d, "angle", path, kind="num"))
        return _wrap(path, Illumination.plane, _get(d, "direction", path, kind="vec"))
    if kind == "point":
        return _wrap(path, Illumination.point, _get(d, "source", path, kind="vec"))
    _fail(f"{path}.kind", f"unknown illumination kind {kind!r}")


def _parse_contrast(d, path, domain):
    if d is None:
        return ContrastField.zero(domain)
    boxes = []
    for i, b in enumerate(_get(d, "boxes", path, [])):
        p = f"{path}.boxes[{i}]"
        box = _wrap(p, Box, _get(b, "lo", p, kind="vec"), _get(b, "hi", p, kind="vec"))
        boxes.append((box, _get(b, "value", p, kind="num")))
    return _wrap(path, ContrastField.from_boxes, domain, boxes)


def _parse_params(d, path):
    d = dict(d or {})
    allowed = set(ms.MeshSizeParams.__dataclass_fields__)
    kw = {k: v for k, v in d.items() if k in allowed}
    return _wrap(path, ms.MeshSizeParams, **kw)


def _parse_rule(d, path):
    if d is None:
        return None
    allowed = set(mg.RefinementRule.__dataclass_fields__)
    kw = {k: v for k, v in d.items() if k in allowed}
    if "directions" in kw:
        kw["directions"] = tuple(tuple(x) for x in kw["directions"])
    return _wrap(path, mg.RefinementRule, **kw)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A validated experiment; ``raw`` keeps the JSON document."""

    raw: dict
    context: WaveContext
    domain: Box
    contrast: ContrastField
    surface: MeasurementSurface
    illuminations: tuple
    params: ms.MeshSizeParams
    rule: object
    tag: str = "run"
    sections: dict = field(default_factory=dict)

    def section(self, name):
        return self.sections.get(name, {})

    def hash(self):
        """Fingerprint of what data and grids depend on."""
        key = {
            "context": self.context.to_dict(),
            "domain": self.domain.to_dict(),
            "surface": self.surface.fingerprint(),
        }
        return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:16]


def parse_config(doc, path="config"):
    """Validate a JSON config and build the domain objects."""
    if not isinstance(doc, dict):
        _fail(path, "expected an object")
    c = _get(doc, "context", path)
    cp = f"{path}.context"
    ctx = _wrap(cp, WaveContext, _get(c, "k", cp, kind="num"), _get(c, "M", cp, 2, "int"))
    dp = f"{path}.domain"
    dd = _get(doc, "domain", path)
    domain = _wrap(dp, Box, _get(dd, "lo", dp, kind="vec"), _get(dd, "hi", dp, kind="vec"))
    if domain.dim != ctx.M:
        _fail(dp, f"domain dimension {domain.dim} does not match M = {ctx.M}")
    contrast = _parse_contrast(doc.get("contrast"), f"{path}.contrast", domain)
    surface = _parse_surface(_get(doc, "surface", path), f"{path}.surface", ctx.M)
    ill_list = _get(doc, "illuminations", path, [])
    if not isinstance(ill_list, list):
        _fail(f"{path}.illuminations", "expected a list")
    ills = tuple(_parse_illumination(x, f"{path}.illuminations[{i}]") for i, x in enumerate(ill_list))
    for i, il in enumerate(ills):
        if il.kind == "plane" and len(il.direction) != ctx.M:
            _fail(f"{path}.illuminations[{i}]", "direction dimension does not match M")
    params = _parse_params(doc.get("meshsize"), f"{path}.meshsize")
    rule = _parse_rule(doc.get("refinement"), f"{path}.refinement")
    sections = {k: doc.get(k, {}) for k in ("forward", "meshsize", "meshgen", "reconstruct")}
    pipe = doc.get("pipeline", [])
    if not isinstance(pipe, list):
        _fail(f"{path}.pipeline", "expected a list")
    for i, step in enumerate(pipe):
        name = _get(step, "step", f"{path}.pipeline[{i}]", kind="str")
        if name not in STEPS:
            _fail(f"{path}.pipeline[{i}].step", f"unknown step {name!r}")
    return ExperimentConfig(doc, ctx, domain, contrast, surface, ills, params, rule, doc.get("tag", "run"), sections)


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path} ({exc.strerror})") from None
    return parse_config(doc)


def preset_document(name):
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown name {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("scatmesh.presets").joinpath(f"{name}.json").read_text()
    return json.loads(text)


# ----------------------------------------------------------------- output


def _log(msg):
    print(msg, file=sys.stderr)


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_gnuplot(path, body):
    Path(path).write_text("set datafile separator ','\nset key autotitle columnhead\n" + body)


def _write_surface(cfg, out):
    cols = ["x", "y", "z"][: cfg.context.M]
    np.savetxt(out / "surface.csv", cfg.surface.points, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def write_grid(grid, path, cfg):
    """Grid CSV plus a JSON sidecar with cell sizes and the config hash."""
    mg.write_grid_csv(grid, path)
    side = {
        "structure": grid.structure,
        "config_hash": cfg.hash(),
        "domain": grid.domain.to_dict() if grid.domain is not None else None,
        "cell_sizes": None if grid.cell_sizes is None else np.asarray(grid.cell_sizes).tolist(),
        "axes": None if grid.axes is None else [np.asarray(a).tolist() for a in grid.axes],
    }
    _dump_json(side, str(path) + ".json")
    name = Path(path).name
    _write_gnuplot(
        Path(path).with_suffix(".gp"),
        "set size ratio -1\n"
        f"plot '{name}' using 1:2 with points pt 7 ps 0.4 lc rgb 'blue' title 'grid', \\\n"
        "     'surface.csv' using 1:2 with points pt 7 ps 1 lc rgb 'red' title 'measurement points'\n",
    )


def read_grid(path, cfg):
    """Read a grid written by ``write_grid``; checks the config hash."""
    side_path = Path(str(path) + ".json")
    if not side_path.exists():
        raise ProvenanceError(f"{path}: missing grid sidecar {side_path.name}")
    side = json.loads(side_path.read_text())
    if side.get("config_hash") != cfg.hash():
        raise ProvenanceError(f"{path}: grid was generated for a different configuration")
    pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    sizes = None if side.get("cell_sizes") is None else np.asarray(side["cell_sizes"], float)
    axes = None if side.get("axes") is None else tuple(np.asarray(a, float) for a in side["axes"])
    dom = None if side.get("domain") is None else Box.from_dict(side["domain"])
    return Grid(pts, side["structure"], sizes, dom, axes)


# ------------------------------------------------------------------ steps


def _forward(cfg, out, seed, step):
    sec = {**cfg.section("forward"), **step}
    if not cfg.illuminations:
        _fail("config.illuminations", "at least one illumination is required")
    solver = sec.get("solver", "ls")
    if solver == "born":
        fields = fw.born_scattered(cfg.context, cfg.contrast, list(cfg.illuminations), cfg.surface)
        meta = {"solver": "born"}
    elif solver == "ls":
        fine_h = float(sec.get("fine_h", cfg.context.wavelength / 20.0))
        fine = mg.uniform_grid(cfg.domain, fine_h)
        fields, results = fw.ls_scattered(cfg.context, cfg.contrast, list(cfg.illuminations), fine, cfg.surface)
        for i, r in enumerate(results):
            _log(f"forward[{i}]: residual {r.residual:.3e}, condition {r.condition:.3e}")
        meta = {"solver": "ls", "fine_h": fine_h}
    else:
        _fail("config.forward.solver", f"unknown solver {solver!r}")
    level = float(sec.get("noise", 0.0))
    if level > 0:
        fields = fw.add_noise(fields, level, seed)
        meta.update(noise=level, seed=seed)
    meta["config_hash"] = cfg.hash()
    data = fw.ScatterData(cfg.context, cfg.contrast, cfg.surface, list(cfg.illuminations), fields, meta)
    path = out / sec.get("output", "data.json")
    data.save(path)
    _log(f"wrote {path}")
    return {"data": str(path.name)}


def _point(sec, key, cfg):
    val = sec.get(key)
    if val is None:
        _fail(f"config.meshsize.{key}", "missing")
    arr = np.asarray(val, float)
    if arr.shape != (cfg.context.M,):
        _fail(f"config.meshsize.{key}", f"expected {cfg.context.M} coordinates")
    return arr


def _alphas(sec):
    spec = sec.get("alphas", {"start": 0.01, "stop": 0.99, "num": 50})
    if isinstance(spec, dict):
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
    return np.asarray(spec, float)


def _sweep(cfg, out, seed, step):
    sec = {**cfg.section("meshsize"), **step}
    z, v = _point(sec, "z", cfg), _point(sec, "v", cfg)
    alphas = _alphas(sec)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        h = ms.alpha_sweep(cfg.context, z, v, cfg.surface, cfg.params, alphas)
    for w in caught:
        _log(f"warning: {w.message}")
    name = sec.get("output", "sweep")
    np.savetxt(out / f"{name}.csv", np.column_stack([alphas, h]), delimiter=",", header="alpha,h", comments="", fmt="%.17g")
    _write_gnuplot(
        out / f"{name}.gp",
        "set xlabel 'alpha'\nset ylabel 'h'\n" f"plot '{name}.csv' using 1:2 with linespoints title 'h_{{z,v}}(alpha)'\n",
    )
    return {"sweep": {"file": f"{name}.csv", "nonincreasing": bool(np.all(np.diff(h) <= 1e-14))}}


def _eval_grid(cfg, sec):
    h = float(sec.get("field_h", cfg.context.wavelength / 10.0))
    return mg.uniform_grid(cfg.domain, h)


def _density(cfg, out, seed, step):
    sec = {**cfg.section("meshsize"), **step}
    params = cfg.params.with_alpha(float(sec["alpha"])) if "alpha" in sec else cfg.params
    v = _point(sec, "v", cfg)
    grid = _eval_grid(cfg, sec)
    sf = ms.density_field(cfg.context, cfg.domain, v, cfg.surface, params, grid)
    name = sec.get("output", "density")
    sf.to_csv(out / f"{name}.csv")
    bad = np.flatnonzero(~sf.mask)
    if bad.size:
        _log(f"{name}: {bad.size} inadmissible evaluation points masked (first: {grid.points[bad[0]].tolist()})")
        cols = ",".join(["x", "y", "z"][: cfg.context.M])
        np.savetxt(out / f"{name}_masked.csv", grid.points[bad], delimiter=",", header=cols, comments="", fmt="%.17g")
    col = cfg.context.M + 2
    _write_gnuplot(
        out / f"{name}.gp",
        "set size ratio -1\nset palette rgbformulae 33,13,10\n"
        f"plot '{name}.csv' using 1:2:{col} with points pt 5 ps 0.5 palette title 'density', \\\n"
        "     'surface.csv' using 1:2 with points pt 7 lc rgb 'red' title 'measurement points'\n",
    )
    return {name: {"points": len(grid), "masked": int(bad.size), "alpha": params.alpha}}


def _sizer(cfg, params, v):
    return mg.mesh_sizer(cfg.context, cfg.surface, params, v)


def _line_family(cfg, params, v, spacing):
    """Lines parallel to axis ``v`` spaced ``spacing`` apart, each marched with h along v."""
    axis = int(np.argmax(np.abs(v)))
    e = np.zeros(cfg.context.M)
    e[axis] = 1.0
    others = [i for i in range(cfg.context.M) if i != axis]
    sub = Box(cfg.domain.lo[others], cfg.domain.hi[others])
    starts, _ = sub.midpoints(spacing)
    sizer = _sizer(cfg, params, e)
    pts = []
    for s in starts:
        start = np.empty(cfg.context.M)
        start[others] = s
        start[axis] = cfg.domain.center[axis]
        g = mg.line_grid(cfg.domain, start, e, sizer)
        pts.append(g.points)
    return Grid(np.concatenate(pts), "line", None, cfg.domain, None)


def _coarse_h(cfg, sec):
    return float(sec.get("h", ms.far_field_mesh(cfg.context)))


def _mesh(cfg, out, seed, step, state):
    sec = {**cfg.section("meshgen"), **step}
    mode = sec.get("mode", "uniform")
    params = cfg.params.with_alpha(float(sec["alpha"])) if "alpha" in sec else cfg.params
    if mode == "uniform":
        grid = mg.uniform_grid(cfg.domain, _coarse_h(cfg, sec))
    elif mode == "line":
        v = np.asarray(sec.get("v", [1.0, 0.0]), float)
        grid = _line_family(cfg, params, v, _coarse_h(cfg, sec))
    elif mode == "tensor":
        sizers = [_sizer(cfg, params, np.eye(cfg.context.M)[i]) for i in range(cfg.context.M)]
        grid = mg.tensor_grid(cfg.domain, sizers)
    elif mode == "adaptive":
        grid = _adaptive(cfg, sec, state)
    else:
        _fail("config.meshgen.mode", f"unknown mode {mode!r}")
    name = sec.get("output", f"grid_{mode}")
    write_grid(grid, out / f"{name}.csv", cfg)
    state.setdefault("grids", {})[name] = grid
    _log(f"{name}: {len(grid)} points")
    return {name: {"points": len(grid), "structure": grid.structure}}


def _adaptive(cfg, sec, state):
    if cfg.rule is None:
        _fail("config.refinement", "adaptive mode requires a refinement rule")
    coarse = state.get("grids", {}).get(sec.get("coarse", "grid_uniform"))
    if coarse is None:
        coarse = mg.uniform_grid(cfg.domain, _coarse_h(cfg, sec))
    data = state.get("data")
    if data is None and sec.get("data"):
        data = _load_data(Path(sec["data"]), cfg)
    indicator_file = sec.get("indicator")
    if data is not None:
        us = data.fields[:, int(sec.get("illumination", 0))]

        def indicator(p):
            return rc.dsm_values(cfg.context, us, p, cfg.surface)

    elif indicator_file:
        vals = np.loadtxt(indicator_file, delimiter=",", skiprows=1, ndmin=2)
        if vals.shape[0] != len(coarse) or not np.array_equal(vals[:, : cfg.context.M], coarse.points):
            raise ProvenanceError(f"{indicator_file}: indicator does not live on the coarse grid")
        if cfg.rule.max_rounds > 1:
            raise PreconditionError("an indicator file supports a single refinement round; pass data instead")
        table = vals[:, cfg.context.M]

        def indicator(p):
            if len(p) != len(table):
                raise PreconditionError("indicator file cannot be evaluated at refined points")
            return table

    else:
        raise PreconditionError("adaptive mode requires an indicator file or scattered data")
    params = cfg.params.with_alpha(cfg.rule.alpha)

    def factory(point, e):
        return _sizer(cfg, params, e)

    return mg.adaptive_refine(coarse, indicator, cfg.rule, factory)


def _load_data(path, cfg):
    data = fw.ScatterData.load(path)
    if data.context != cfg.context or data.surface.fingerprint() != cfg.surface.fingerprint():
        raise ProvenanceError(f"{path}: data were produced for a different wavenumber or surface")
    if data.meta.get("config_hash", cfg.hash()) != cfg.hash():
        raise ProvenanceError(f"{path}: data were produced for a different configuration")
    return data


def _summarise_components(grid, values, cfg):
    """Components of {I^2 >= level * max I^2} with their centroids."""
    sq = values**2
    mask = sq >= COMPONENT_LEVEL * np.nanmax(sq)
    lab = mg.grid_components(grid, mask)
    n = int(lab.max()) + 1
    cents = [grid.points[lab == i].mean(axis=0).tolist() for i in range(n)]
    return {"level": COMPONENT_LEVEL, "count": n, "centroids": cents}


def _reconstruct(cfg, out, seed, step, state):
    sec = {**cfg.section("reconstruct"), **step}
    method = sec.get("method", "dsm")
    gname = sec.get("grid", "grid_uniform")
    grid = state.get("grids", {}).get(gname)
    if grid is None:
        grid = read_grid(out / f"{gname}.csv", cfg) if not sec.get("grid_file") else read_grid(Path(sec["grid_file"]), cfg)
    data = state.get("data")
    if data is None:
        data = _load_data(Path(sec.get("data_file", out / "data.json")), cfg)
    prov = rc.provenance(cfg.context, cfg.surface, data.illuminations)
    prov["config_hash"] = cfg.hash()
    if method == "dsm":
        fields = [
            rc.IndicatorField(grid, rc.dsm_values(cfg.context, data.fields[:, n], grid.points, cfg.surface), "dsm", prov)
            for n in range(data.fields.shape[1])
        ]
        ind = fields[0] if len(fields) == 1 else rc.dsm_combined(fields)
    elif method == "msm":
        if grid.cell_sizes is None:
            raise PreconditionError("msm needs a grid with cell sizes")
        src = rc.msm_backprop(cfg.context, data.fields, grid, cfg.surface)
        eta = rc.msm_eta(cfg.context, src, data.illuminations, grid)
        ind = rc.IndicatorField(grid, np.nan_to_num(eta), "msm", prov)
    else:
        _fail("config.reconstruct.method", f"unknown method {method!r}")
    name = sec.get("output", f"{method}_{gname}")
    ind.write(out / f"{name}.csv")
    col = cfg.context.M + 2
    _write_gnuplot(
        out / f"{name}.gp",
        "set size ratio -1\nset palette rgbformulae 33,13,10\n"
        f"plot '{name}.csv' using 1:2:{col} with points pt 5 ps 1 palette title 'I^2'\n",
    )
    summary = {"points": len(grid), "method": method}
    if method == "dsm":
        summary["components"] = _summarise_components(grid, ind.values, cfg)
    return {name: summary}


def _data_step(cfg, out, seed, step, state):
    res = _forward(cfg, out, seed, step)
    state["data"] = fw.ScatterData.load(out / res["data"])
    return res


STEPS = {
    "forward": _data_step,
    "sweep": lambda cfg, out, seed, step, state: _sweep(cfg, out, seed, step),
    "density": lambda cfg, out, seed, step, state: _density(cfg, out, seed, step),
    "meshgen": _mesh,
    "reconstruct": _reconstruct,
}


def run_pipeline(cfg, out, seed=0):
    """Run ``cfg.raw['pipeline']`` into ``out``; returns the summary dict."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_surface(cfg, out)
    state, summary = {}, {"tag": cfg.tag, "config_hash": cfg.hash()}
    for step in cfg.raw.get("pipeline", []):
        args = {k: v for k, v in step.items() if k != "step"}
        summary.update(STEPS[step["step"]](cfg, out, seed, args, state))
    _dump_json(summary, out / "summary.json")
    return summary


def run_preset(name, out, seed=0):
    doc = preset_document(name)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(doc, out / "config.json")
    summaries = {}
    for i, run in enumerate(doc["runs"]):
        cfg = parse_config(run, f"{name}.runs[{i}]")
        _log(f"[{name}] run {cfg.tag}")
        summaries[cfg.tag] = run_pipeline(cfg, out / cfg.tag, seed)
    return summaries


# -------------------------------------------------------------------- main


def _set_threads(n):
    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads: must be >= 1")
    try:
        import numba
    except ImportError:
        return
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--seed", type=int, default=0, help="noise seed")
    common.add_argument("--threads", type=int, default=None, help="kernel threads")
    cfg_arg = argparse.ArgumentParser(add_help=False)
    cfg_arg.add_argument("--config", type=Path, required=True, help="experiment JSON")

    p = argparse.ArgumentParser(prog="scatmesh", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("forward", parents=[common, cfg_arg], help="synthesize scattered data")
    m = sub.add_parser("meshsize", parents=[common, cfg_arg], help="alpha sweep or density field")
    m.add_argument("--z", type=float, nargs="+")
    m.add_argument("--v", type=float, nargs="+")
    grp = m.add_mutually_exclusive_group()
    grp.add_argument("--sweep", action="store_true", help="alpha sweep at (z, v)")
    grp.add_argument("--field", action="store_true", help="density field over the domain")
    g = sub.add_parser("meshgen", parents=[common, cfg_arg], help="generate a grid")
    g.add_argument("--mode", choices=["uniform", "line", "tensor", "adaptive"])
    g.add_argument("--indicator", type=Path, help="indicator CSV on the coarse grid (adaptive)")
    g.add_argument("--data", type=Path, help="scatter data JSON driving the indicator (adaptive)")
    g.add_argument("--coarse", type=Path, help="coarse grid CSV (adaptive)")
    r = sub.add_parser("reconstruct", parents=[common, cfg_arg], help="indicator field on a grid")
    r.add_argument("--data", type=Path, required=True)
    r.add_argument("--grid", type=Path, required=True)
    r.add_argument("--method", choices=["dsm", "msm"], default="dsm")
    pr = sub.add_parser("preset", parents=[common], help="run a shipped experiment")
    pr.add_argument("name", choices=PRESETS)
    return p


def _single(cfg, args, step):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_surface(cfg, out)
    name = step.pop("step")
    return STEPS[name](cfg, out, args.seed, step, {})


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _set_threads(args.threads)
        if args.command == "preset":
            run_preset(args.name, args.out, args.seed)
            return 0
        cfg = load_config(args.config)
        if args.command == "forward":
            _single(cfg, args, {"step": "forward"})
        elif args.command == "meshsize":
            step = {"step": "sweep" if args.sweep or (args.z and not args.field) else "density"}
            if args.z is not None:
                step["z"] = args.z
            if args.v is not None:
                step["v"] = args.v
            if step["step"] == "density" and "v" not in step and "v" not in cfg.section("meshsize"):
                step["v"] = [1.0] + [0.0] * (cfg.context.M - 1)
            _single(cfg, args, step)
        elif args.command == "meshgen":
            step = {"step": "meshgen"}
            if args.mode:
                step["mode"] = args.mode
            if args.indicator:
                step["indicator"] = str(args.indicator)
            if args.data:
                step["data"] = str(args.data)
            state = {}
            if args.coarse:
                state["grids"] = {"grid_uniform": read_grid(args.coarse, cfg)}
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            _write_surface(cfg, out)
            step.pop("step")
            _mesh(cfg, out, args.seed, step, state)
        elif args.command == "reconstruct":
            state = {"data": _load_data(args.data, cfg), "grids": {"input": read_grid(args.grid, cfg)}}
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            _write_surface(cfg, out)
            res = _reconstruct(cfg, out, args.seed, {"method": args.method, "grid": "input", "output": args.method}, state)
            _dump_json(res, out / f"{args.method}_summary.json")
    except ScatMeshError as exc:
        _log(f"error: {exc}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
