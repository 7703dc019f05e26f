"""Command-line entry point: render, classify, accesses, blaschke and report."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import __version__
from .access import (
    DataQualityError,
    InconclusiveError,
    Invariance,
    Verdict,
    access_invariance,
    accessible_poles,
    count_accesses,
    singularity_count_estimate,
)
from .blaschke import BlaschkeProduct, denjoy_wolff_and_classify
from .core import InternalInconsistency, PreconditionError, parse_complex
from .dynamics import (
    INFINITE,
    ClassificationMask,
    OrbitParams,
    Target,
    classify_grid,
    classify_point,
    default_targets,
    degree_on_component,
    target_from_json,
    target_to_json,
)
from .maps import Direction, MeromorphicMap, fixed_point_candidates, parse_map_spec, poles_in_rect
from .render import PRESETS, Palette, get_preset, render_mask

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_INCONSISTENT = 3


@dataclass
class RunConfig:
    map: str | None = None
    rect: tuple = (-6.0, -6.0, 6.0, 6.0)
    resolution: int = 400
    params: dict = field(default_factory=dict)
    radii: tuple = (10 * math.pi, 20 * math.pi, 30 * math.pi, 40 * math.pi)
    samples: int = 2048
    out_dir: str = "out"
    component: str | None = None
    probe: str | None = None
    w: str | None = None
    workers: int = 1

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise PreconditionError(f"cannot read config file {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise PreconditionError(f"config file {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
        if not isinstance(data, dict):
            raise PreconditionError(f"config file {path} must hold a JSON object")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known)
        if extra:
            raise PreconditionError(f"unknown config fields {extra}; allowed: {sorted(known)}")
        cfg = cls(**data)
        cfg.rect = tuple(cfg.rect)
        cfg.radii = tuple(cfg.radii)
        return cfg

    def orbit_params(self) -> OrbitParams:
        try:
            return OrbitParams(**self.params)
        except TypeError as exc:
            raise PreconditionError(f"bad orbit params: {exc}") from None

    def config_hash(self) -> str:
        """Hash of everything that determines results (output location and workers excluded)."""
        d = asdict(self)
        d.pop("out_dir")
        d.pop("workers")
        d["params"] = self.orbit_params().as_dict()
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def provenance(cfg: RunConfig) -> str:
    import PIL
    import scipy

    return (f"config={cfg.config_hash()} fatou_access={__version__} numpy={np.__version__} "
            f"scipy={scipy.__version__} pillow={PIL.__version__} python={platform.python_version()}")


# ---------------------------------------------------------------- parsing helpers

def parse_rect(text) -> tuple:
    if isinstance(text, (list, tuple)):
        vals = list(text)
    else:
        try:
            vals = [float(v) for v in str(text).split(",")]
        except ValueError:
            raise PreconditionError(f"malformed rect {text!r}; expected x0,y0,x1,y1") from None
    if len(vals) != 4:
        raise PreconditionError(f"malformed rect {text!r}; expected x0,y0,x1,y1")
    x0, y0, x1, y1 = (float(v) for v in vals)
    if not (x1 > x0 and y1 > y0) or not all(math.isfinite(v) for v in (x0, y0, x1, y1)):
        raise PreconditionError(f"malformed rect {text!r}; need x0 < x1 and y0 < y1")
    return (x0, y0, x1, y1)


def parse_radii(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    out = []
    for tok in str(text).split(","):
        tok = tok.strip().lower()
        scale = 1.0
        if tok.endswith("pi"):
            tok, scale = tok[:-2].rstrip("*") or "1", math.pi
        try:
            out.append(float(tok) * scale)
        except ValueError:
            raise PreconditionError(f"malformed radius {tok!r} in {text!r}") from None
    return tuple(out)


def parse_component(m: MeromorphicMap, label: str, rect) -> Target:
    """attracted:<point>, baker:<direction> or baker:<direction>:<index>."""
    parts = label.strip().split(":")
    if parts[0] == "attracted" and len(parts) == 2:
        c = parse_complex(parts[1])
        x0, y0, x1, y1 = rect
        big = (min(x0, c.real) - 2, min(y0, c.imag) - 2, max(x1, c.real) + 2, max(y1, c.imag) + 2)
        cands = [p for p, _ in fixed_point_candidates(m, big)]
        near = [p for p in cands if abs(p - c) <= 1e-3]
        if not near:
            raise PreconditionError(f"no attracting fixed point within 1e-3 of {parts[1]} for {m.spec}")
        return Target("fixed", near[0])
    if parts[0] == "baker" and len(parts) in (2, 3):
        try:
            d = Direction(parts[1])
        except ValueError:
            raise PreconditionError(f"unknown direction {parts[1]!r} in {label!r}") from None
        idx = None
        if len(parts) == 3:
            try:
                idx = int(parts[2])
            except ValueError:
                raise PreconditionError(f"bad strip index in {label!r}") from None
        return Target("baker", None, d, idx)
    raise PreconditionError(f"malformed component {label!r}; use attracted:<z>, baker:<dir> or baker:<dir>:<k>")


# ---------------------------------------------------------------- mask cache

def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def mask_key(spec: str, rect, resolution: int, p: OrbitParams) -> str:
    blob = json.dumps({"map": spec, "rect": [float(v) for v in rect], "resolution": resolution,
                       "params": p.as_dict()}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def cached_mask(m: MeromorphicMap, rect, resolution: int, p: OrbitParams, out_dir: Path,
                workers: int = 1, use_cache: bool = True, log=None) -> tuple:
    """(mask, path, hit). Masks live in <out>/cache/<key>.mask with a JSON sidecar."""
    cache = out_dir / "cache"
    cache.mkdir(parents=True, exist_ok=True)
    key = mask_key(m.spec, rect, resolution, p)
    path, meta = cache / f"{key}.mask", cache / f"{key}.json"
    if use_cache and path.exists() and meta.exists():
        info = json.loads(meta.read_text())
        mask = ClassificationMask.from_bytes(path.read_bytes(), [target_from_json(t) for t in info["targets"]], p)
        if log:
            log(f"mask {key}: cache hit")
        return mask, path, True
    mask = classify_grid(m, rect, resolution, resolution, p, workers)
    _atomic_write(path, mask.to_bytes())
    _atomic_write(meta, (json.dumps(mask.metadata(), indent=2, sort_keys=True) + "\n").encode())
    if log:
        log(f"mask {key}: computed")
    return mask, path, False


# ---------------------------------------------------------------- commands

def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PreconditionError(f"cannot create output directory {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise PreconditionError(f"output directory {out} is not writable")
    return out


def _write_json(path: Path, obj: dict) -> None:
    _atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def _require_map(cfg: RunConfig) -> MeromorphicMap:
    if not cfg.map:
        raise PreconditionError("no map given; pass --map or set \"map\" in the config file")
    return parse_map_spec(cfg.map)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_render(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    p = cfg.orbit_params()
    if args.preset:
        preset = get_preset(args.preset)
        m = parse_map_spec(preset.spec)
        cfg = replace(cfg, map=preset.spec, rect=preset.rect, resolution=preset.resolution)
        name, palette = preset.id, Palette(preset.palette)
    else:
        m = _require_map(cfg)
        name, palette = f"render-{mask_key(m.spec, cfg.rect, cfg.resolution, p)}", Palette(args.palette)
    mask, _, _ = cached_mask(m, cfg.rect, cfg.resolution, p, out, cfg.workers, not args.no_cache, _log)
    png = render_mask(mask, palette, out / f"{name}.png", m.period)
    print(png)
    print(provenance(cfg))
    return EXIT_OK


def cmd_classify(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    m = _require_map(cfg)
    p = cfg.orbit_params()
    mask, path, _ = cached_mask(m, cfg.rect, cfg.resolution, p, out, cfg.workers, not args.no_cache, _log)
    codes, counts = np.unique(mask.fate, return_counts=True)
    names = {0: "unresolved", 1: "julia"}
    summary = {
        "map": m.spec,
        "rect": list(mask.rect),
        "resolution": cfg.resolution,
        "mask": path.name,
        "cells": {names.get(int(c)) or mask.target_of(int(c)).label: int(n) for c, n in zip(codes, counts)},
        "provenance": provenance(cfg),
    }
    _write_json(out / f"classify-{path.stem}.json", summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _need_component(cfg: RunConfig, m: MeromorphicMap) -> Target:
    if not cfg.component:
        raise PreconditionError("no component given; pass --component (e.g. attracted:0 or baker:up)")
    return parse_component(m, cfg.component, cfg.rect)


def _access_json(m, est) -> dict:
    inv = []
    if est.verdict is Verdict.STABLE:
        inv = [access_invariance(m, est, c).value for c in range(len(est.chains))]
    return {
        "radii": list(est.radii),
        "counts": list(est.counts),
        "verdict": est.verdict.value,
        "channels": est.k,
        "invariance": inv,
        "invariant_channels": sum(1 for v in inv if v == Invariance.INVARIANT.value) if inv else None,
    }


def cmd_accesses(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    m = _require_map(cfg)
    comp = _need_component(cfg, m)
    est = count_accesses(m, comp, cfg.radii, cfg.samples, cfg.orbit_params())
    rep = {"map": m.spec, "component": comp.label, **_access_json(m, est), "provenance": provenance(cfg)}
    _write_json(out / f"accesses-{cfg.config_hash()}.json", rep)
    print(json.dumps(rep, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_blaschke(args, cfg: RunConfig) -> int:
    B = BlaschkeProduct.parse(args.spec)
    res = denjoy_wolff_and_classify(B, validate=args.check)
    dw = res.denjoy_wolff
    dw_txt = f"{dw.real:.12g}" if abs(dw.imag) < 1e-12 else f"{dw.real:.12g}{dw.imag:+.12g}i"
    mu = res.multiplier
    mu_txt = f"{mu.real:.12g}" if abs(mu.imag) < 1e-12 else f"{mu.real:.12g}{mu.imag:+.12g}i"
    print(f"D={res.D}, class={res.value.value}, DW={dw_txt}, multiplier={mu_txt}")
    return EXIT_OK


def default_probe(m: MeromorphicMap, comp: Target, mask: ClassificationMask, p: OrbitParams) -> complex:
    """A point well inside the component: the fixed point nudged by 0.1, else the deepest mask cell."""
    ts = default_targets(m, mask.rect)
    if comp.kind == "fixed":
        z = comp.point + 0.1
        r = classify_point(m, z, ts, p)
        if r.target is not None and r.target.same(comp):
            return z
    code = mask.code_of(comp)
    inside = np.pad(mask.fate == code, 1)
    depth = ndimage.distance_transform_cdt(inside, metric="taxicab")[1:-1, 1:-1]
    row, col = np.unravel_index(int(np.argmax(depth)), depth.shape)
    return mask.cell_center(int(row), int(col))


def build_report(cfg: RunConfig, use_cache: bool = True, log=None) -> dict:
    out = _out_dir(cfg)
    m = _require_map(cfg)
    comp = _need_component(cfg, m)
    p = cfg.orbit_params()
    mask, _, _ = cached_mask(m, cfg.rect, cfg.resolution, p, out, cfg.workers, use_cache, log)
    probe = parse_complex(cfg.probe) if cfg.probe else default_probe(m, comp, mask, p)
    notes = []

    deg = degree_on_component(m, comp, probe, resolution=cfg.resolution, p=p, workers=cfg.workers)
    est = count_accesses(m, comp, cfg.radii, cfg.samples, p)
    acc = _access_json(m, est)

    x0, y0, x1, y1 = mask.rect
    poles = poles_in_rect(m, (x0 + 1, y0 + 1, x1 - 1, y1 - 1))
    seed = comp.point if comp.kind == "fixed" else probe
    pole_rep = accessible_poles(m, mask, comp, poles, seed=seed,
                                estimate=est if est.chains else None, p=p)

    sing = None
    if deg.value == INFINITE:
        w = parse_complex(cfg.w) if cfg.w else probe
        try:
            sing = singularity_count_estimate(m, comp, w, est, probe=probe, resolution=cfg.resolution,
                                              p=p, degree=deg, workers=cfg.workers).value
        except InconclusiveError as exc:
            notes.append(f"singularity estimate inconclusive: {exc}")
    return {
        "map": m.spec,
        "component": comp.label,
        "probe": [probe.real, probe.imag],
        "rect": list(mask.rect),
        "resolution": cfg.resolution,
        **acc,
        "accessible_poles": [{"pole": [pa.pole.real, pa.pole.imag], "accessible": pa.accessible,
                              "method": pa.method} for pa in pole_rep.poles],
        "degree": deg.value,
        "degree_counts": list(deg.counts),
        "singularity_estimate": sing,
        "notes": notes,
        "provenance": provenance(cfg),
    }


def load_schema() -> dict:
    return json.loads(resources.files("fatou_access").joinpath("report.schema.json").read_text())


def validate_report(rep: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(rep, load_schema())
    except jsonschema.ValidationError as exc:
        raise InternalInconsistency(f"report fails its schema: {exc.message}") from None


def cmd_report(args, cfg: RunConfig) -> int:
    rep = build_report(cfg, not args.no_cache, _log)
    rep.pop("invariance", None)
    validate_report(rep)
    path = _out_dir(cfg) / f"report-{cfg.config_hash()}.json"
    _write_json(path, rep)
    print(json.dumps(rep, indent=2, sort_keys=True))
    _log(f"report written to {path}")
    return EXIT_OK


# ---------------------------------------------------------------- argument handling

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--out", dest="out_dir", help="output directory (default: out)")
    common.add_argument("--workers", type=int, help="worker threads for grid classification")
    common.add_argument("--no-cache", action="store_true", help="recompute masks even if cached")
    common.add_argument("--max-iter", type=int, help="orbit iteration budget")

    mapped = argparse.ArgumentParser(add_help=False)
    mapped.add_argument("--map", help="map spec, e.g. z-tan, z+tan, z+i+tan, newton:z+exp, z+exp(-z)")
    mapped.add_argument("--rect", help="x0,y0,x1,y1")
    mapped.add_argument("--res", dest="resolution", type=int, help="grid resolution per side")

    comp = argparse.ArgumentParser(add_help=False)
    comp.add_argument("--component", help="attracted:<z>, baker:<dir> or baker:<dir>:<k>")
    comp.add_argument("--radii", help="comma-separated radii; 'pi' is allowed, e.g. 10pi,20pi")
    comp.add_argument("--samples", type=int, help="samples per circle")

    ap = argparse.ArgumentParser(prog="fatou-access", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", parents=[common, mapped], help="render a preset or a map to PNG")
    r.add_argument("preset", nargs="?", help=f"one of: {', '.join(PRESETS)}")
    r.add_argument("--palette", default="distinct", choices=["distinct", "periodic"])
    r.add_argument("--list", action="store_true", help="list presets and exit")

    sub.add_parser("classify", parents=[common, mapped], help="classify a grid and cache the mask")
    sub.add_parser("accesses", parents=[common, mapped, comp], help="count channels to infinity")

    b = sub.add_parser("blaschke", help="fixed points and Denjoy-Wolff class of a Blaschke product")
    b.add_argument("spec", help='e.g. "theta=0;zeros=0.5,-0.5i"')
    b.add_argument("--check", action="store_true", help="confirm the verdict by iterating the orbit of 0")

    rp = sub.add_parser("report", parents=[common, mapped, comp], help="full JSON report for a component")
    rp.add_argument("--probe", help="point inside the component for the degree count")
    rp.add_argument("--w", help="target value for the singularity estimate (default: the probe)")
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "map", None):
        cfg.map = args.map
    if getattr(args, "rect", None):
        cfg.rect = args.rect
    if getattr(args, "resolution", None) is not None:
        cfg.resolution = args.resolution
    if getattr(args, "out_dir", None):
        cfg.out_dir = args.out_dir
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "max_iter", None) is not None:
        cfg.params = {**cfg.params, "max_iter": args.max_iter}
    for name in ("component", "probe", "w"):
        if getattr(args, name, None):
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "radii", None):
        cfg.radii = args.radii
    if getattr(args, "samples", None) is not None:
        cfg.samples = args.samples
    cfg.rect = parse_rect(cfg.rect)
    cfg.radii = parse_radii(cfg.radii)
    if cfg.resolution < 1 or cfg.workers < 1:
        raise PreconditionError("resolution and workers must be positive")
    return cfg


COMMANDS = {
    "render": cmd_render,
    "classify": cmd_classify,
    "accesses": cmd_accesses,
    "blaschke": cmd_blaschke,
    "report": cmd_report,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "render" and args.list:
        for pr in PRESETS.values():
            print(f"{pr.id:16s} {pr.spec:16s} {pr.caption}")
        return EXIT_OK
    try:
        cfg = config_from_args(args)
        if args.command == "render" and not args.preset and not cfg.map:
            raise PreconditionError("render needs a preset name or --map")
        return COMMANDS[args.command](args, cfg)
    except InternalInconsistency as exc:
        print(f"error: internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (PreconditionError, DataQualityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
