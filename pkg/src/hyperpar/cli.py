"""Command-line front end: ``eval``, ``verify``, ``sweep`` and ``mesh``.

Jobs are described by a YAML or JSON config file; command-line flags
override individual keys.  Reports are JSON (sorted keys) so that a fixed
config and seed give byte-identical output.

Exit codes: 0 everything passed, 1 an identity failed, 2 bad configuration,
3 incomplete (some points could not be evaluated).  An identity failure
wins over incompleteness.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .curvature import principal_curvatures
from .errors import ConfigError, DSLError, GeometryError, HyperparError, JetError
from .euclid import EuclidFrame
from .jet import DEFAULT_ORDER, Jet, as_points
from .parallel import (
    SINGULAR_TOL,
    Base,
    ParallelConfig,
    base_state,
    derivative_check,
    family_jet,
    full_report,
    offset_frame,
)
from .surfaces import NormalizationDef, SurfaceDef, catalog

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INCOMPLETE = 0, 1, 2, 3

DEFAULT_TOLERANCES = {"identity": 1e-6, "transport": 1e-6, "derivative": 1e-6}
DEFAULT_DELTA = 1e-4

# surfaces of the default verification grid; the sphere and ellipsoid are
# sampled away from the chart poles, where a longitude-dependent support
# function stops being smooth
DEFAULT_GRID = [
    {"name": "sphere", "params": {"r": 1, "n": 2}, "domain": [None, [-1.2, 1.2]]},
    {"name": "ellipsoid", "params": {"a": 1, "b": 1.2, "c": 1.5}, "domain": [None, [-1.2, 1.2]]},
    {"name": "paraboloid", "params": {"n": 3}},
]
DEFAULT_NORMALIZATIONS = ["euclidean", "equiaffine", "expr:1+0.1*sin(u1)"]
DEFAULT_MU = [-0.3, 0.05, 0.2]
DEFAULT_POINTS = 50

KNOWN_KEYS = {
    "surface", "surfaces", "normalization", "normalizations", "points", "seed", "mu",
    "order", "tolerances", "delta", "output", "mesh",
}


# configuration


@dataclass
class JobConfig:
    surfaces: list  # of (label, SurfaceDef)
    normalizations: list  # of raw normalization specs, resolved per surface
    points: object  # int count or explicit (m, n) array
    seed: int
    mu: list
    order: int
    tolerances: dict
    delta: float
    output: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=dict)

    def sample(self, surface: SurfaceDef) -> np.ndarray:
        if isinstance(self.points, int):
            return surface.sample(self.points, self.seed)
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != surface.n:
            raise ConfigError(f"points: expected a list of {surface.n}-coordinate chart points")
        return pts

    def normalization(self, spec, surface: SurfaceDef) -> NormalizationDef:
        return parse_normalization(spec, surface.n)


def _line_index(text: str) -> dict:
    """Line numbers of top-level keys in a YAML/JSON document."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


class _Ctx:
    def __init__(self, lines: dict, source: str):
        self.lines = lines
        self.source = source

    def error(self, key: str, message: str) -> ConfigError:
        top = key.split(".")[0].split("[")[0]
        where = f"{self.source}, line {self.lines[top]}" if top in self.lines else self.source
        return ConfigError(f"{where}: {key}: {message}")


def load_config_text(path: str) -> tuple[dict, dict]:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    try:
        data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}, line {err.lineno}: {err.msg}") from None
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f"{path}, line {mark.line + 1}" if mark else path
        raise ConfigError(f"{where}: {getattr(err, 'problem', None) or err}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data, _line_index(text)


def parse_normalization(spec, n: int) -> NormalizationDef:
    if isinstance(spec, dict):
        if set(spec) != {"expr"} or not isinstance(spec["expr"], str):
            raise ConfigError("normalization: mapping form must be {expr: <expression>}")
        spec = "expr:" + spec["expr"]
    if not isinstance(spec, str):
        raise ConfigError(f"normalization: expected a string, got {spec!r}")
    if spec == "euclidean":
        return NormalizationDef.euclidean()
    if spec == "equiaffine":
        return NormalizationDef.equiaffine()
    if spec.startswith("expr:"):
        return NormalizationDef.custom(spec[5:].strip().strip('"'), n)
    raise ConfigError(f"normalization: expected euclidean, equiaffine or expr:<expression>, got {spec!r}")


def parse_mu(spec) -> list[float]:
    """``[0.1, 0.2]``, ``"0.1,0.2"`` or a range ``"a:b:step"`` (inclusive)."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return [float(spec)]
    if isinstance(spec, list):
        try:
            return [float(v) for v in spec]
        except (TypeError, ValueError):
            raise ConfigError(f"mu: expected numbers, got {spec!r}") from None
    if not isinstance(spec, str):
        raise ConfigError(f"mu: expected a list or a:b:step range, got {spec!r}")
    try:
        if ":" in spec:
            a, b, step = (float(v) for v in spec.split(":"))
            if step <= 0 or b < a:
                raise ConfigError(f"mu: range {spec!r} needs a <= b and step > 0")
            count = int(math.floor((b - a) / step + 1e-9)) + 1
            return [round(a + i * step, 12) for i in range(count)]
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"mu: cannot parse {spec!r}") from None


def _number(value, key, ctx, kind=float, positive=False):
    if isinstance(value, bool):
        raise ctx.error(key, f"expected a number, got {value!r}")
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise ctx.error(key, f"expected a number, got {value!r}") from None
    if kind is int and out != value:
        raise ctx.error(key, f"expected an integer, got {value!r}")
    if positive and not out > 0:
        raise ctx.error(key, f"must be positive, got {value!r}")
    return out


def _surface(spec, key, ctx) -> tuple[str, SurfaceDef]:
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict):
        raise ctx.error(key, "expected a surface name or mapping")
    params = spec.get("params") or {}
    if not isinstance(params, dict):
        raise ctx.error(f"{key}.params", "expected a mapping")
    try:
        if "name" in spec:
            extra = set(spec) - {"name", "params", "domain"}
            if extra:
                raise ctx.error(key, f"unknown keys {sorted(extra)}")
            surface = catalog(spec["name"], params)
            label = spec["name"]
        elif "expressions" in spec:
            exprs = spec["expressions"]
            domain = spec.get("domain")
            if not isinstance(exprs, list) or not all(isinstance(e, str) for e in exprs):
                raise ctx.error(f"{key}.expressions", "expected a list of expression strings")
            if domain is None:
                raise ctx.error(f"{key}.domain", "inline surfaces need a domain")
            n = len(exprs) - 1
            surface = SurfaceDef.from_expressions(exprs, n, domain, params, spec.get("label", "custom"))
            return spec.get("label", "custom"), surface
        else:
            raise ctx.error(key, "missing surface name (or inline expressions)")
        if spec.get("domain") is not None:
            dom = spec["domain"]
            if not isinstance(dom, list) or len(dom) != surface.n:
                raise ctx.error(f"{key}.domain", f"expected {surface.n} intervals (null keeps the default)")
            surface = surface.restrict(dom)
    except ConfigError:
        raise
    except (DSLError, TypeError, ValueError) as err:
        raise ctx.error(key, str(err)) from None
    return label, surface


def build_job(data: dict, lines: dict | None = None, source: str = "config", require_surface: bool = True) -> JobConfig:
    """Validate a raw config mapping and build a :class:`JobConfig`."""
    ctx = _Ctx(lines or {}, source)
    unknown = set(data) - KNOWN_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ctx.error(key, f"unknown key (allowed: {', '.join(sorted(KNOWN_KEYS))})")

    if "surface" in data and "surfaces" in data:
        raise ctx.error("surfaces", "give either surface or surfaces, not both")
    if "surface" in data:
        specs = [data["surface"]]
    elif "surfaces" in data:
        specs = data["surfaces"]
        if not isinstance(specs, list) or not specs:
            raise ctx.error("surfaces", "expected a non-empty list")
    elif require_surface:
        raise ctx.error("surface", "missing surface name")
    else:
        specs = DEFAULT_GRID
    surfaces = [_surface(s, f"surfaces[{i}]" if "surfaces" in data else "surface", ctx) for i, s in enumerate(specs)]

    if "normalization" in data and "normalizations" in data:
        raise ctx.error("normalizations", "give either normalization or normalizations, not both")
    if "normalizations" in data:
        norms = data["normalizations"]
        if not isinstance(norms, list) or not norms:
            raise ctx.error("normalizations", "expected a non-empty list")
    elif "normalization" in data:
        norms = [data["normalization"]]
    else:
        norms = ["euclidean"] if require_surface or "surfaces" in data or "surface" in data else DEFAULT_NORMALIZATIONS
    norm_key = "normalizations" if "normalizations" in data else "normalization"
    for i, spec in enumerate(norms):
        for _, surface in surfaces:
            try:
                parse_normalization(spec, surface.n)
            except (ConfigError, DSLError) as err:
                label = f"normalizations[{i}]" if norm_key == "normalizations" else "normalization"
                raise ctx.error(label, str(err)) from None

    points = data.get("points", DEFAULT_POINTS)
    if isinstance(points, list):
        try:
            points = as_points(np.asarray(points, dtype=float)).tolist()
        except (TypeError, ValueError):
            raise ctx.error("points", "expected a count or a list of chart points") from None
    else:
        points = _number(points, "points", ctx, int, positive=True)
    seed = _number(data.get("seed", 0), "seed", ctx, int)
    default_mu = DEFAULT_MU if not (require_surface or "surface" in data or "surfaces" in data) else [0.5]
    try:
        mu = parse_mu(data.get("mu", default_mu))
    except ConfigError as err:
        raise ctx.error("mu", str(err).removeprefix("mu: ")) from None
    if not mu:
        raise ctx.error("mu", "empty list")
    order = _number(data.get("order", DEFAULT_ORDER), "order", ctx, int, positive=True)

    tolerances = dict(DEFAULT_TOLERANCES)
    tol_in = data.get("tolerances", {})
    if isinstance(tol_in, (int, float, str)) and not isinstance(tol_in, bool):
        # YAML 1.1 reads 1e-8 (no dot) as a string
        tol_in = {k: _number(tol_in, "tolerances", ctx, positive=True) for k in DEFAULT_TOLERANCES}
    if not isinstance(tol_in, dict):
        raise ctx.error("tolerances", "expected a mapping or a number")
    for k, v in tol_in.items():
        if k not in DEFAULT_TOLERANCES:
            raise ctx.error(f"tolerances.{k}", f"unknown suite (allowed: {', '.join(DEFAULT_TOLERANCES)})")
        tolerances[k] = _number(v, f"tolerances.{k}", ctx, positive=True)
    delta = _number(data.get("delta", DEFAULT_DELTA), "delta", ctx, positive=True)

    output = data.get("output") or {}
    if isinstance(output, str):
        output = {"path": output}
    if not isinstance(output, dict) or set(output) - {"path"}:
        raise ctx.error("output", "expected a path or {path: ...}")

    mesh = data.get("mesh") or {}
    if not isinstance(mesh, dict) or set(mesh) - {"resolution"}:
        raise ctx.error("mesh", "expected {resolution: ...}")
    res = mesh.get("resolution", [16, 16])
    if isinstance(res, int) and not isinstance(res, bool):
        res = [res, res]
    if not isinstance(res, list) or not all(isinstance(r, int) and not isinstance(r, bool) for r in res):
        raise ctx.error("mesh.resolution", "expected an integer or a list of integers")
    mesh = {"resolution": res}

    return JobConfig(surfaces, list(norms), points, seed, mu, order, tolerances, delta, output, mesh)


def _apply_flags(data: dict, args) -> dict:
    data = dict(data)
    if args.surface is not None:
        data.pop("surfaces", None)
        surface = {"name": args.surface}
        old = data.get("surface")
        if isinstance(old, dict) and old.get("name") == args.surface and "params" in old:
            surface["params"] = dict(old["params"])
        data["surface"] = surface
    if args.param:
        if "surface" not in data:
            raise ConfigError("--param needs a surface (--surface or the config)")
        surface = data["surface"]
        surface = {"name": surface} if isinstance(surface, str) else dict(surface)
        params = dict(surface.get("params") or {})
        for item in args.param:
            if "=" not in item:
                raise ConfigError(f"--param: expected key=value, got {item!r}")
            key, value = item.split("=", 1)
            try:
                params[key.strip()] = yaml.safe_load(value)
            except yaml.YAMLError:
                params[key.strip()] = value
        surface["params"] = params
        data["surface"] = surface
    if args.normalization is not None:
        data.pop("normalizations", None)
        data["normalization"] = args.normalization
    for attr in ("points", "seed", "order", "delta"):
        value = getattr(args, attr, None)
        if value is not None:
            data[attr] = value
    if args.mu is not None:
        data["mu"] = args.mu
    if args.tol is not None:
        data["tolerances"] = args.tol
    if args.out is not None:
        output = data.get("output") or {}
        output = {"path": output} if isinstance(output, str) else dict(output)
        output["path"] = args.out
        data["output"] = output
    if getattr(args, "resolution", None) is not None:
        mesh = dict(data.get("mesh") or {})
        mesh["resolution"] = args.resolution
        data["mesh"] = mesh
    return data


# per-point error isolation


def guarded(fn, points: np.ndarray):
    """Evaluate ``fn`` on as many points as possible.

    Returns ``(result, good_indices, errors)`` where ``errors`` maps a point
    index to a message.  Geometry errors name their offending points and are
    peeled off; other numeric errors fall back to point-by-point probing.
    """
    idx = np.arange(len(points))
    errors = {}
    while idx.size:
        try:
            return fn(points[idx]), idx, errors
        except (GeometryError, JetError) as err:
            bad = list(getattr(err, "indices", []) or [])
            if not bad:
                for j, i in enumerate(idx):
                    try:
                        fn(points[i : i + 1])
                    except (GeometryError, JetError) as single:
                        errors[int(i)] = f"{type(single).__name__}: {single}"
                        bad.append(j)
                if not bad:
                    raise
            else:
                for j in bad:
                    errors[int(idx[j])] = f"{type(err).__name__}: {err}"
            idx = np.delete(idx, bad)
    return None, idx, errors


def _f(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _flist(arr):
    return [_f(v) for v in np.ravel(arr)]


# commands


def cmd_eval(job: JobConfig) -> tuple[dict, int]:
    results = []
    incomplete = False
    for label, surface in job.surfaces:
        points = job.sample(surface)
        for spec in job.normalizations:
            nd = job.normalization(spec, surface)
            base, good, errors = guarded(lambda p: base_state(surface, nd, p, job.order), points)
            rows = {int(i): {"index": int(i), "u": _flist(points[i]), "error": msg} for i, msg in errors.items()}
            if base is not None:
                rel, curv = base.rel, base.curv
                tnorm = np.linalg.norm(rel.T_vec, axis=1)
                for j, i in enumerate(good):
                    rows[int(i)] = {
                        "index": int(i),
                        "u": _flist(points[i]),
                        "q": _f(rel.q.bvalue[j]),
                        "Ktilde": _f(rel.frame.Ktilde.bvalue[j]),
                        "k": _flist(curv.k[j]),
                        "H": _flist(curv.H[j]),
                        "K": _f(curv.K[j]),
                        "J_pick": _f(rel.J_pick[j]),
                        "phi": _f(rel.phi.bvalue[j]),
                        "T_norm": _f(tnorm[j]),
                        "family": [],
                    }
                for mu in job.mu:
                    _family_rows(base, good, mu, rows)
            incomplete |= any("error" in r for r in rows.values())
            results.append({
                "surface": label,
                "normalization": nd.label,
                "points": [rows[i] for i in sorted(rows)],
            })
    status = "incomplete" if incomplete else "ok"
    return {"command": "eval", "status": status, "results": results}, EXIT_INCOMPLETE if incomplete else EXIT_OK


def _family_rows(base: Base, good, mu, rows):
    A = family_jet(base.rel, mu).bvalue if mu != 0 else np.ones(len(good))
    for j, i in enumerate(good):
        entry = {"mu": mu, "A": _f(A[j])}
        if abs(A[j]) < SINGULAR_TOL:
            entry["flag"] = "singular"
        rows[int(i)]["family"].append(entry)
    ok = np.flatnonzero(np.abs(A) >= SINGULAR_TOL)
    if not ok.size:
        return
    star = _star_curvature(base, ok, mu)
    for pos, (j, res) in enumerate(star):
        entry = rows[int(good[j])]["family"][-1]
        if isinstance(res, str):
            entry["error"] = res
            continue
        entry.update(k_star=_flist(res.k), K_star=_f(res.K), H_star=_flist(res.H))


def _slice_base(base: Base, sel) -> Base:
    """Base data restricted to a subset of its points (jets sliced along the batch axis)."""
    sel = np.asarray(sel)

    def cut(v):
        if isinstance(v, Jet):
            return Jet(v.c[..., sel], v.n_vars, v.order)
        if isinstance(v, np.ndarray):
            return v[sel]
        if isinstance(v, dict):
            return {k: cut(w) for k, w in v.items()}
        return v

    frame = replace(base.frame, **{f.name: cut(getattr(base.frame, f.name)) for f in fields(EuclidFrame)})
    rel = replace(base.rel, frame=frame, **{
        f.name: cut(getattr(base.rel, f.name)) for f in fields(base.rel) if f.name != "frame"
    })
    curv = replace(base.curv, **{f.name: cut(getattr(base.curv, f.name)) for f in fields(base.curv)})
    return Base(base.points[sel], rel, curv)


def _star_curvature(base: Base, sel, mu):
    """Curvature data of the parallel member at the selected points, one entry per point."""
    sub = _slice_base(base, sel)
    if mu == 0:
        return [(int(j), _one(sub.curv, p)) for p, j in enumerate(sel)]

    def run(pts_idx):
        part = _slice_base(sub, pts_idx[:, 0].astype(int))
        off = offset_frame(ParallelConfig(None, None, mu), base=part, full=False)
        return principal_curvatures(off.star)

    handles = np.arange(len(sel), dtype=float)[:, None]
    curv, good, errors = guarded(run, handles)
    out = {int(sel[p]): msg for p, msg in errors.items()}
    if curv is not None:
        for pos, p in enumerate(good):
            out[int(sel[p])] = _one(curv, pos)
    return sorted(out.items())


@dataclass
class _Point:
    k: np.ndarray
    K: float
    H: np.ndarray


def _one(curv, pos):
    return _Point(curv.k[pos], float(curv.K[pos]), curv.H[pos])


def cmd_verify(job: JobConfig) -> tuple[dict, int]:
    suites = []
    failed = incomplete = False
    tol = job.tolerances
    for label, surface in job.surfaces:
        points = job.sample(surface)
        for spec in job.normalizations:
            nd = job.normalization(spec, surface)
            base, good, errors = guarded(lambda p: base_state(surface, nd, p, job.order), points)
            for mu in job.mu:
                entry = {
                    "surface": label,
                    "normalization": nd.label,
                    "mu": mu,
                    "errors": {str(i): m for i, m in sorted(errors.items())},
                    "identities": {},
                }
                if base is not None:
                    _verify_member(job, surface, nd, base, good, mu, entry)
                failed |= any(not r["pass"] for r in entry["identities"].values())
                incomplete |= bool(entry["errors"])
                suites.append(entry)
    code = EXIT_FAIL if failed else EXIT_INCOMPLETE if incomplete else EXIT_OK
    status = {EXIT_OK: "pass", EXIT_FAIL: "fail", EXIT_INCOMPLETE: "incomplete"}[code]
    return {"command": "verify", "status": status, "tolerances": tol, "delta": job.delta, "suites": suites}, code


def _verify_member(job, surface, nd, base, good, mu, entry):
    cfg = ParallelConfig(surface, nd, mu, job.order)
    handles = np.arange(len(good), dtype=float)[:, None]

    def run(h):
        part = _slice_base(base, h[:, 0].astype(int))
        rep = full_report(cfg, offset=offset_frame(cfg, base=part), tol=job.tolerances["identity"],
                          transport_tol=job.tolerances["transport"])
        deriv = derivative_check(cfg, base=part, delta=job.delta)
        return rep, deriv

    result, ok, errors = guarded(run, handles)
    for p, msg in errors.items():
        entry["errors"][str(int(good[p]))] = msg
    entry["errors"] = dict(sorted(entry["errors"].items(), key=lambda kv: int(kv[0])))
    if result is None:
        return
    rep, deriv = result
    idx = [int(good[p]) for p in ok]
    table = {}
    for rec in rep.records.values():
        table[rec.id] = {
            "law": rec.law,
            "tolerance": rec.tolerance,
            "max_residual": _f(rec.max_residual),
            "pass": rec.passed,
            "not_applicable": rec.reason if rec.not_applicable.any() else None,
            "residuals": dict(zip(map(str, idx), _flist(rec.residual))),
        }
    dtol = job.tolerances["derivative"]
    table["derivative_law"] = {
        "law": "d B*/d mu = (B*)^2",
        "tolerance": dtol,
        "max_residual": _f(deriv.max()),
        "pass": bool(np.all(deriv <= dtol)),
        "not_applicable": None,
        "residuals": dict(zip(map(str, idx), _flist(deriv))),
    }
    entry["identities"] = table


def sweep_rows(job: JobConfig) -> tuple[list[list], int]:
    n_max = max(s.n for _, s in job.surfaces)
    header = ["surface", "normalization", "point", *[f"u{i + 1}" for i in range(n_max)], "mu", "A", "K_star",
              *[f"H_star_{i + 1}" for i in range(n_max)], *[f"k_star_{i + 1}" for i in range(n_max)], "flag"]
    rows = [header]
    incomplete = False
    for label, surface in job.surfaces:
        n = surface.n
        points = job.sample(surface)
        pad = [""] * (n_max - n)
        for spec in job.normalizations:
            nd = job.normalization(spec, surface)
            base, good, errors = guarded(lambda p: base_state(surface, nd, p, job.order, full=False), points)
            incomplete |= bool(errors)
            per_point = {i: [] for i in range(len(points))}
            for mu in job.mu:
                for i, msg in errors.items():
                    per_point[i].append([mu, "", "", *[""] * n_max, *[""] * n_max, "error: " + msg.split(":")[0]])
                if base is None:
                    continue
                A = family_jet(base.rel, mu).bvalue if mu != 0 else np.ones(len(good))
                ok = np.flatnonzero(np.abs(A) >= SINGULAR_TOL)
                star = dict(_star_curvature(base, ok, mu)) if ok.size else {}
                for j, i in enumerate(good):
                    if abs(A[j]) < SINGULAR_TOL:
                        per_point[int(i)].append([mu, "", "", *[""] * (2 * n_max), "singular"])
                        continue
                    res = star[j]
                    if isinstance(res, str):
                        incomplete = True
                        per_point[int(i)].append([mu, _csv(A[j]), "", *[""] * (2 * n_max), "error: " + res.split(":")[0]])
                        continue
                    per_point[int(i)].append([mu, _csv(A[j]), _csv(res.K), *[_csv(v) for v in res.H[1:]], *pad,
                                              *[_csv(v) for v in res.k], *pad, ""])
            for i in range(len(points)):
                coords = [_csv(v) for v in points[i]] + pad
                for row in per_point[i]:
                    rows.append([label, nd.label, i, *coords, *row])
    return rows, EXIT_INCOMPLETE if incomplete else EXIT_OK


def _csv(x) -> str:
    return repr(float(x))


def write_csv(rows, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerows(rows)


def cmd_mesh(job: JobConfig, out_dir: Path) -> tuple[dict, int]:
    res = job.mesh["resolution"]
    files = []
    incomplete = False
    for label, surface in job.surfaces:
        if surface.n != 2:
            raise ConfigError(f"mesh export supports surfaces with n = 2 only ({label} has n = {surface.n})")
        if len(res) != 2 or min(res) < 3:
            raise ConfigError(f"mesh.resolution {res}: each axis needs at least 3 samples for non-degenerate faces")
        points = surface.grid(res)
        for spec in job.normalizations:
            nd = job.normalization(spec, surface)
            stem = f"{label}_{nd.kind}"
            base, good, errors = guarded(lambda p: base_state(surface, nd, p, job.order, full=False), points)
            incomplete |= bool(errors)
            count = len(points)
            base_v = np.array([surface.evaluate(p) for p in points])
            image_v = np.full((count, 3), np.nan)
            scalars = {k: np.full(count, np.nan) for k in ("Ktilde", "K", "H")}
            if base is not None:
                image_v[good] = base.rel.y.bvalue
                scalars["Ktilde"][good] = base.frame.Ktilde.bvalue
                scalars["K"][good] = base.curv.K
                scalars["H"][good] = base.curv.H[:, 1]
            meshes = [("base", base_v), ("image", image_v)]
            for m, mu in enumerate(job.mu):
                verts = np.full((count, 3), np.nan)
                if base is not None:
                    A = family_jet(base.rel, mu).bvalue
                    ok = np.abs(A) >= SINGULAR_TOL
                    incomplete |= not ok.all()
                    pos = base.frame.x.bvalue + mu * base.rel.y.bvalue
                    verts[good[ok]] = pos[ok]
                meshes.append((f"mu{m}", verts))
            for name, verts in meshes:
                path = out_dir / f"{stem}_{name}.obj"
                path.write_text(obj_text(verts, res, f"{label} {nd.label} {name}"))
                files.append(path.name)
            table = out_dir / f"{stem}_scalars.csv"
            with table.open("w", newline="") as fh:
                write_csv([["vertex", "u1", "u2", "Ktilde", "K", "H"]] + [
                    [i + 1, _csv(points[i, 0]), _csv(points[i, 1]),
                     *["" if not math.isfinite(scalars[k][i]) else _csv(scalars[k][i]) for k in ("Ktilde", "K", "H")]]
                    for i in range(count)
                ], fh)
            files.append(table.name)
    code = EXIT_INCOMPLETE if incomplete else EXIT_OK
    return {"command": "mesh", "status": "incomplete" if incomplete else "ok", "files": files, "mu": job.mu}, code


def obj_text(verts: np.ndarray, res, title: str) -> str:
    """ASCII polygon mesh with ``v x y z`` and quad ``f i j k l`` records (1-based)."""
    r1, r2 = res
    lines = [f"# {title}", f"# grid {r1} x {r2}"]
    for v in verts:
        lines.append("v " + " ".join("nan" if not math.isfinite(c) else repr(float(c)) for c in v))
    for i in range(r1 - 1):
        for j in range(r2 - 1):
            a = i * r2 + j + 1
            lines.append(f"f {a} {a + r2} {a + r2 + 1} {a + 1}")
    return "\n".join(lines) + "\n"


# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperpar", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("eval", "dump frame and curvature scalars per point"),
        ("verify", "run the identity suite (default grid when no surface is given)"),
        ("sweep", "tabulate the parallel family over mu as CSV"),
        ("mesh", "export OBJ meshes of the base, relative image and parallel members"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML or JSON job file")
        p.add_argument("--surface", help="catalog surface name")
        p.add_argument("--param", action="append", metavar="K=V", help="surface parameter (repeatable)")
        p.add_argument("--normalization", help='euclidean | equiaffine | expr:"..."')
        p.add_argument("--points", type=int, help="number of quasi-random chart points")
        p.add_argument("--seed", type=int)
        p.add_argument("--mu", help="comma list or a:b:step range")
        p.add_argument("--order", type=int, help="jet order")
        p.add_argument("--tol", type=float, help="tolerance for every suite")
        p.add_argument("--out", help="output path (directory for mesh)")
        if name == "verify":
            p.add_argument("--delta", type=float, help="finite-difference step in mu")
        if name == "mesh":
            p.add_argument("--resolution", type=int, nargs=2, metavar=("N1", "N2"))
    return parser


def _write(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _summary(report: dict) -> str:
    lines = []
    for suite in report.get("suites", []):
        bad = [(k, v) for k, v in suite["identities"].items() if not v["pass"]]
        head = f"{suite['surface']:<12} {suite['normalization']:<22} mu={suite['mu']:<6g}"
        worst = max((v["max_residual"] or 0.0 for v in suite["identities"].values()), default=float("nan"))
        state = "FAIL" if bad else "INCOMPLETE" if suite["errors"] else "PASS"
        lines.append(f"{state:<10} {head} laws={len(suite['identities'])} worst={worst:.2e}")
        for k, v in bad:
            lines.append(f"    {k:<28} residual={v['max_residual']:.3e} tol={v['tolerance']:.1e}  ({v['law']})")
        for i, msg in suite["errors"].items():
            lines.append(f"    point {i}: {msg}")
    lines.append(f"status: {report['status']}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        data, lines, source = {}, {}, "command line"
        if args.config:
            data, lines = load_config_text(args.config)
            source = args.config
        data = _apply_flags(data, args)
        require = args.command != "verify"
        job = build_job(data, lines, source, require_surface=require)
        out = job.output.get("path")
        if args.command == "eval":
            report, code = cmd_eval(job)
            _write(json.dumps(report, indent=2, sort_keys=True) + "\n", out)
        elif args.command == "verify":
            report, code = cmd_verify(job)
            _write(json.dumps(report, indent=2, sort_keys=True) + "\n", out)
            sys.stderr.write(_summary(report))
        elif args.command == "sweep":
            rows, code = sweep_rows(job)
            buf = io.StringIO()
            write_csv(rows, buf)
            _write(buf.getvalue(), out)
        else:
            out_dir = Path(out or ".")
            out_dir.mkdir(parents=True, exist_ok=True)
            report, code = cmd_mesh(job, out_dir)
            sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
        return code
    except (ConfigError, DSLError) as err:
        sys.stderr.write(f"config error: {err}\n")
        return EXIT_CONFIG
    except HyperparError as err:
        sys.stderr.write(f"error: {type(err).__name__}: {err}\n")
        return EXIT_INCOMPLETE


if __name__ == "__main__":
    sys.exit(main())
