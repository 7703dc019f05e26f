"""Orbit engine, grid classifier, preimage solver and degree estimator."""

from __future__ import annotations

import math
import struct
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .core import INF, PreconditionError, chordal_array
from .maps import (
    Direction,
    MeromorphicMap,
    baker_drifts,
    baker_traps,
    evaluate,
    fixed_point_candidates,
    poles_in_rect,
    trap_index_range,
)

UNRESOLVED_CODE = 0
JULIA_CODE = 1
FIRST_TARGET_CODE = 2
INFINITE = "infinite"
TILE_ROWS = 16

_K_UNRES, _K_JULIA, _K_FIXED, _K_DRIFT, _K_TRAP = range(5)


@dataclass(frozen=True)
class OrbitParams:
    max_iter: int = 200
    attraction_tol: float = 1e-8
    escape_modulus: float = 1e12
    baker_window: int = 20
    baker_drift_tol: float = 0.1

    def __post_init__(self):
        for name in ("max_iter", "attraction_tol", "escape_modulus", "baker_window", "baker_drift_tol"):
            if not getattr(self, name) > 0:
                raise PreconditionError(f"orbit parameter {name} must be positive")
        if self.baker_window >= self.max_iter:
            raise PreconditionError("baker_window must be smaller than max_iter")
        if self.max_iter > 65535:
            raise PreconditionError("max_iter must fit the 16-bit step counter")

    def as_dict(self) -> dict:
        return {
            "max_iter": self.max_iter,
            "attraction_tol": self.attraction_tol,
            "escape_modulus": self.escape_modulus,
            "baker_window": self.baker_window,
            "baker_drift_tol": self.baker_drift_tol,
        }


class Fate(Enum):
    ATTRACTED = "attracted"
    BAKER = "baker"
    JULIA_HIT = "julia"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class Target:
    """An attractor an orbit can be assigned to.

    kind 'fixed': an attracting fixed point at `point`.
    kind 'baker': escape in `direction`; `index` names the strip/band for indexed
    Baker domains and is None when a single drift describes the whole direction.
    """

    kind: str
    point: complex | None = None
    direction: Direction | None = None
    index: int | None = None

    def sort_key(self):
        if self.kind == "fixed":
            return (0, self.point.real, self.point.imag, "", 0)
        return (1, 0.0, 0.0, self.direction.value, -10**9 if self.index is None else self.index)

    @property
    def label(self) -> str:
        if self.kind == "fixed":
            p = self.point
            return f"attracted:{_fmt_point(p)}"
        if self.index is None:
            return f"baker:{self.direction.value}"
        return f"baker:{self.direction.value}:{self.index}"

    def shifted(self, n: int, period: complex) -> "Target":
        if n == 0:
            return self
        if self.kind == "fixed":
            return Target("fixed", self.point + n * period)
        if self.index is None:
            return self
        return Target("baker", None, self.direction, self.index + n)

    def same(self, other: "Target", tol: float = 1e-6) -> bool:
        if self.kind != other.kind:
            return False
        if self.kind == "fixed":
            return abs(self.point - other.point) <= tol
        return self.direction == other.direction and self.index == other.index


def _fmt_point(p: complex) -> str:
    re, im = round(p.real, 10) + 0.0, round(p.imag, 10) + 0.0
    if im == 0:
        return f"{re:.10g}"
    return f"{re:.10g}{im:+.10g}i"


@dataclass(frozen=True)
class OrbitResult:
    fate: Fate
    target: Target | None
    steps: int
    final: complex
    error: str | None = None


@dataclass(frozen=True)
class TargetSet:
    """Attracting fixed points an orbit may converge to, plus the map's Baker directions."""

    fixed: tuple
    drifts: tuple
    traps: tuple

    @classmethod
    def for_rect(cls, m: MeromorphicMap, rect, extra=()) -> "TargetSet":
        x0, y0, x1, y1 = rect
        mx = 3 * (x1 - x0) + 60
        my = 3 * (y1 - y0) + 60
        big = (x0 - mx, y0 - my, x1 + mx, y1 + my)
        pts = [c for c, _ in fixed_point_candidates(m, big)]
        for c in extra:
            if all(abs(c - q) > 1e-7 for q in pts):
                pts.append(complex(c))
        pts.sort(key=lambda c: (c.real, c.imag))
        return cls(tuple(pts), tuple(baker_drifts(m)), tuple(sorted(baker_traps(m), key=lambda d: d.value)))


# ---------------------------------------------------------------- orbit engine

def _run_orbits(m: MeromorphicMap, z0: np.ndarray, ts: TargetSet, p: OrbitParams):
    """Iterate all points; returns (kind, a, b, steps, error, final) arrays.

    kind: 0 unresolved, 1 julia, 2 fixed (a = index into ts.fixed), 3 drift Baker
    (a = index into ts.drifts), 4 trapped Baker (a = index into ts.traps, b = strip index).
    """
    z0 = np.asarray(z0, dtype=complex).ravel()
    n = z0.size
    kind = np.zeros(n, dtype=np.int8)
    a = np.zeros(n, dtype=np.int64)
    b = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int32)
    err = np.zeros(n, dtype=bool)
    z = z0.copy()
    tree = cKDTree(np.c_[np.real(ts.fixed), np.imag(ts.fixed)]) if ts.fixed else None
    traps = baker_traps(m)
    trap_fns = [traps[d] for d in ts.traps]
    drift_vals = np.array([m.drifts[d] for d in ts.drifts], dtype=complex)
    runs = np.zeros((n, len(drift_vals)), dtype=np.int32)

    bad = np.isnan(z0)
    err[bad] = True
    julia0 = ~bad & (np.isinf(z0) | (np.abs(np.nan_to_num(z0)) > p.escape_modulus))
    kind[julia0] = _K_JULIA
    active = np.flatnonzero(~bad & ~julia0)

    def settle_traps(idx, w, it):
        keep = np.ones(idx.size, dtype=bool)
        for j, fn in enumerate(trap_fns):
            mask, k = fn(w)
            hit = mask & keep
            if hit.any():
                sel = idx[hit]
                kind[sel], a[sel], b[sel], steps[sel] = _K_TRAP, j, k[hit], it
                keep &= ~hit
        return keep

    if trap_fns and active.size:
        keep = settle_traps(active, z[active], 0)
        active = active[keep]

    for it in range(1, p.max_iter + 1):
        if active.size == 0:
            break
        za = z[active]
        w = evaluate(m, za)[0]
        nan = np.isnan(w)
        with np.errstate(invalid="ignore", over="ignore"):
            julia = ~nan & (np.isinf(w) | (np.abs(w) > p.escape_modulus))
        if nan.any():
            sel = active[nan]
            err[sel], steps[sel] = True, it
        if julia.any():
            sel = active[julia]
            kind[sel], steps[sel] = _K_JULIA, it
            z[sel] = INF
        live = ~(nan | julia)
        inc = np.where(live, w - za, 0)
        keep = live.copy()

        conv = live & (np.abs(inc) <= p.attraction_tol)
        if conv.any():
            sel = active[conv]
            steps[sel] = it
            if tree is not None:
                wc = w[conv]
                dist, nearest = tree.query(np.c_[wc.real, wc.imag])
                good = dist <= 10 * p.attraction_tol
                kind[sel[good]], a[sel[good]] = _K_FIXED, nearest[good]
            keep &= ~conv

        if trap_fns and keep.any():
            sub = np.flatnonzero(keep)
            k2 = settle_traps(active[sub], w[sub], it)
            keep[sub[~k2]] = False

        if drift_vals.size and keep.any():
            r = runs[active]
            for j, dv in enumerate(drift_vals):
                match = np.abs(inc - dv) <= p.baker_drift_tol * abs(dv)
                r[:, j] = np.where(match & keep, r[:, j] + 1, 0)
            runs[active] = r
            hit = keep & (r.max(axis=1) >= p.baker_window)
            if hit.any():
                sel = active[hit]
                kind[sel], a[sel], steps[sel] = _K_DRIFT, np.argmax(r[hit], axis=1), it
                keep &= ~hit

        z[active[live]] = w[live]
        active = active[keep]
    steps[active] = p.max_iter
    return kind, a, b, steps, err, z


def _labels(kind, a, b, ts: TargetSet) -> list:
    out = []
    for k, ai, bi in zip(kind.tolist(), a.tolist(), b.tolist()):
        if k == _K_FIXED:
            out.append(Target("fixed", ts.fixed[ai]))
        elif k == _K_DRIFT:
            out.append(Target("baker", None, ts.drifts[ai]))
        elif k == _K_TRAP:
            out.append(Target("baker", None, ts.traps[ai], bi))
        else:
            out.append(None)
    return out


def default_targets(m: MeromorphicMap, rect) -> TargetSet:
    return TargetSet.for_rect(m, rect)


def classify_points(m: MeromorphicMap, z, targets: TargetSet | None = None,
                    p: OrbitParams = OrbitParams()) -> list:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if targets is None:
        finite = z[np.isfinite(z)]
        r = float(np.max(np.abs(finite))) if finite.size else 1.0
        targets = default_targets(m, (-r - 1, -r - 1, r + 1, r + 1))
    kind, a, b, steps, err, final = _run_orbits(m, z, targets, p)
    labels = _labels(kind, a, b, targets)
    out = []
    for i, lab in enumerate(labels):
        if err[i]:
            out.append(OrbitResult(Fate.UNRESOLVED, None, int(steps[i]), complex(final[i]),
                                   "evaluation produced NaN"))
        elif kind[i] == _K_JULIA:
            out.append(OrbitResult(Fate.JULIA_HIT, None, int(steps[i]), INF))
        elif lab is None:
            out.append(OrbitResult(Fate.UNRESOLVED, None, int(steps[i]), complex(final[i])))
        else:
            fate = Fate.ATTRACTED if lab.kind == "fixed" else Fate.BAKER
            out.append(OrbitResult(fate, lab, int(steps[i]), complex(final[i])))
    return out


def classify_point(m: MeromorphicMap, z, targets: TargetSet | None = None,
                   p: OrbitParams = OrbitParams()) -> OrbitResult:
    return classify_points(m, [z], targets, p)[0]


def point_labels(m: MeromorphicMap, z, ts: TargetSet, p: OrbitParams):
    """(labels, error flags) for an array of points."""
    kind, a, b, steps, err, _ = _run_orbits(m, np.asarray(z, dtype=complex), ts, p)
    labs = _labels(kind, a, b, ts)
    return [None if e else l for l, e in zip(labs, err.tolist())], err


# ---------------------------------------------------------------- masks

@dataclass(frozen=True, eq=False)
class ClassificationMask:
    spec: str
    rect: tuple
    width: int
    height: int
    fate: np.ndarray
    steps: np.ndarray
    targets: tuple
    params: OrbitParams = field(default_factory=OrbitParams)

    def __post_init__(self):
        if self.fate.shape != (self.height, self.width) or self.steps.shape != self.fate.shape:
            raise PreconditionError("mask arrays do not match the declared dimensions")
        if self.fate.size and int(self.fate.max()) >= FIRST_TARGET_CODE + len(self.targets):
            raise PreconditionError("mask holds a fate code outside its target list")

    @property
    def dx(self) -> float:
        return (self.rect[2] - self.rect[0]) / self.width

    @property
    def dy(self) -> float:
        return (self.rect[3] - self.rect[1]) / self.height

    def cell_center(self, row: int, col: int) -> complex:
        return complex(self.rect[0] + (col + 0.5) * self.dx, self.rect[3] - (row + 0.5) * self.dy)

    def cell_of(self, z):
        """(row, col) of the cell containing z, or None outside the (closed) rect."""
        row, col, inside = self.cells_of(np.array([z]))
        return (int(row[0]), int(col[0])) if inside[0] else None

    def cells_of(self, z: np.ndarray):
        z = np.asarray(z, dtype=complex)
        x0, y0, x1, y1 = self.rect
        inside = (z.real >= x0) & (z.real <= x1) & (z.imag >= y0) & (z.imag <= y1)
        # the right and bottom edges belong to the last column and row
        col = np.clip(np.floor((z.real - x0) / self.dx), 0, self.width - 1).astype(np.int64)
        row = np.clip(np.floor((y1 - z.imag) / self.dy), 0, self.height - 1).astype(np.int64)
        return row, col, inside

    def code_of(self, target: Target) -> int:
        for i, t in enumerate(self.targets):
            if t.same(target):
                return FIRST_TARGET_CODE + i
        raise PreconditionError(f"component {target.label} does not occur in the mask")

    def target_of(self, code: int) -> Target | None:
        if code < FIRST_TARGET_CODE:
            return None
        return self.targets[code - FIRST_TARGET_CODE]

    def header(self) -> str:
        x0, y0, x1, y1 = self.rect
        return f"FAM {self.spec} RECT {x0!r} {y0!r} {x1!r} {y1!r} DIM {self.width} {self.height}\n"

    def to_bytes(self) -> bytes:
        rec = (self.fate.astype("<u4") | (self.steps.astype("<u4") << 16)).astype("<u4")
        return self.header().encode("ascii") + rec.tobytes(order="C")

    def metadata(self) -> dict:
        return {"params": self.params.as_dict(), "targets": [target_to_json(t) for t in self.targets]}

    def save(self, path) -> None:
        path = Path(path)
        path.write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes, targets=(), params: OrbitParams = OrbitParams()):
        nl = data.index(b"\n")
        head = data[:nl].decode("ascii").split()
        if head[0] != "FAM" or head[2] != "RECT" or head[7] != "DIM":
            raise PreconditionError("not a mask file")
        spec = head[1]
        rect = tuple(float(v) for v in head[3:7])
        w, h = int(head[8]), int(head[9])
        rec = np.frombuffer(data[nl + 1:], dtype="<u4")
        if rec.size != w * h:
            raise PreconditionError("mask file is truncated")
        rec = rec.reshape(h, w)
        return cls(spec, rect, w, h, (rec & 0xFFFF).astype(np.uint16),
                   (rec >> 16).astype(np.uint16), tuple(targets), params)


def target_to_json(t: Target) -> dict:
    if t.kind == "fixed":
        return {"kind": "fixed", "point": [t.point.real, t.point.imag]}
    return {"kind": "baker", "direction": t.direction.value, "index": t.index}


def target_from_json(d: dict) -> Target:
    if d["kind"] == "fixed":
        return Target("fixed", complex(*d["point"]))
    return Target("baker", None, Direction(d["direction"]), d["index"])


def _period_shift(m: MeromorphicMap, rect):
    """Whole periods n such that rect - n*T is centred near the origin (0 without a period)."""
    T = m.period
    if T is None:
        return 0
    x0, y0, x1, y1 = rect
    if T.imag == 0:
        return round(((x0 + x1) / 2) / T.real)
    return round(((y0 + y1) / 2) / T.imag)


def classify_grid(m: MeromorphicMap, rect, width: int, height: int,
                  p: OrbitParams = OrbitParams(), workers: int = 1,
                  targets: TargetSet | None = None) -> ClassificationMask:
    """Classify every cell centre; results do not depend on `workers`.

    For maps with f(z + T) = f(z) + T the rectangle is first translated by whole
    periods towards the origin, and when T spans a whole number of rows (or
    columns) only one period band is iterated; the rest are relabelled copies.
    """
    if width < 1 or height < 1:
        raise PreconditionError("grid needs at least one cell")
    x0, y0, x1, y1 = rect
    if not (x1 > x0 and y1 > y0):
        raise PreconditionError(f"malformed rect {rect!r}")
    n0 = _period_shift(m, rect)
    T = m.period if m.period is not None else 0j
    if n0:
        if T.imag == 0:
            red = (x0 - n0 * T.real, y0, x1 - n0 * T.real, y1)
        else:
            red = (x0, y0 - n0 * T.imag, x1, y1 - n0 * T.imag)
    else:
        red = tuple(rect)
    ts = targets if targets is not None else default_targets(m, red)
    rx0, ry0, rx1, ry1 = red
    dx, dy = (rx1 - rx0) / width, (ry1 - ry0) / height
    xs = rx0 + (np.arange(width) + 0.5) * dx
    ys = ry1 - (np.arange(height) + 0.5) * dy

    band_rows, band_cols = height, width
    if m.period is not None:
        if T.imag != 0:
            P = abs(T.imag) / dy
            if abs(P - round(P)) < 1e-9 and 1 <= round(P) < height:
                band_rows = round(P)
        else:
            P = abs(T.real) / dx
            if abs(P - round(P)) < 1e-9 and 1 <= round(P) < width:
                band_cols = round(P)

    tiles = [(r, min(r + TILE_ROWS, band_rows)) for r in range(0, band_rows, TILE_ROWS)]

    def run(tile):
        r0, r1 = tile
        zz = xs[None, :band_cols] + 1j * ys[r0:r1, None]
        return _run_orbits(m, zz.ravel(), ts, p)

    if workers > 1 and len(tiles) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, tiles))
    else:
        parts = [run(t) for t in tiles]
    kind = np.concatenate([q[0] for q in parts]).reshape(band_rows, band_cols)
    a = np.concatenate([q[1] for q in parts]).reshape(band_rows, band_cols)
    b = np.concatenate([q[2] for q in parts]).reshape(band_rows, band_cols)
    steps = np.concatenate([q[3] for q in parts]).reshape(band_rows, band_cols)
    err = np.concatenate([q[4] for q in parts]).reshape(band_rows, band_cols)
    kind = np.where(err, _K_UNRES, kind)

    # replicate period bands: band shift s relative to the computed band
    if band_rows < height or band_cols < width:
        if band_rows < height:
            reps = -(-height // band_rows)
            sgn = -1 if T.imag > 0 else 1  # rows run downwards
            kind = np.tile(kind, (reps, 1))[:height]
            a = np.tile(a, (reps, 1))[:height]
            b = np.tile(b, (reps, 1))[:height]
            steps = np.tile(steps, (reps, 1))[:height]
            shift = np.repeat(sgn * np.arange(reps), band_rows)[:height][:, None] * np.ones((1, width), int)
        else:
            reps = -(-width // band_cols)
            sgn = 1 if T.real > 0 else -1
            kind = np.tile(kind, (1, reps))[:, :width]
            a = np.tile(a, (1, reps))[:, :width]
            b = np.tile(b, (1, reps))[:, :width]
            steps = np.tile(steps, (1, reps))[:, :width]
            shift = np.ones((height, 1), int) * np.repeat(sgn * np.arange(reps), band_cols)[:width][None, :]
    else:
        shift = np.zeros((height, width), dtype=int)
    shift = shift + n0

    # labels in the original frame
    declared = [Target("fixed", c) for c in ts.fixed
                if red[0] <= c.real <= red[2] and red[1] <= c.imag <= red[3]]
    declared += [Target("baker", None, d) for d in ts.drifts]
    for d in ts.traps:
        declared += [Target("baker", None, d, k) for k in trap_index_range(m, d, red)]
    declared = [t.shifted(n0, T) for t in declared]

    keyed = {}
    flat_kind, flat_a, flat_b, flat_s = kind.ravel(), a.ravel(), b.ravel(), shift.ravel()
    sel = flat_kind >= _K_FIXED
    combos = np.unique(np.c_[flat_kind[sel], flat_a[sel], flat_b[sel], flat_s[sel]], axis=0)
    for kk, aa, bb, ss in combos.tolist():
        if kk == _K_FIXED:
            t = Target("fixed", ts.fixed[aa])
        elif kk == _K_DRIFT:
            t = Target("baker", None, ts.drifts[aa])
        else:
            t = Target("baker", None, ts.traps[aa], bb)
        keyed[(kk, aa, bb, ss)] = t.shifted(ss, T)
    all_targets = []
    for t in declared + list(keyed.values()):
        if not any(t.same(q, 1e-9) for q in all_targets):
            all_targets.append(t)
    all_targets.sort(key=Target.sort_key)

    code_of = {}
    for key, t in keyed.items():
        code_of[key] = FIRST_TARGET_CODE + next(i for i, q in enumerate(all_targets) if t.same(q, 1e-9))
    fate = np.full(kind.size, UNRESOLVED_CODE, dtype=np.uint16)
    fate[flat_kind == _K_JULIA] = JULIA_CODE
    if combos.size:
        # vectorized lookup of each combination's code
        idx = np.flatnonzero(sel)
        keys = np.c_[flat_kind[idx], flat_a[idx], flat_b[idx], flat_s[idx]]
        _, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = np.asarray(inv).ravel()
        codes = np.array([code_of[tuple(c)] for c in combos.tolist()], dtype=np.uint16)
        fate[idx] = codes[inv]
    return ClassificationMask(m.spec, tuple(float(v) for v in rect), width, height,
                              fate.reshape(height, width),
                              np.minimum(steps, 65535).astype(np.uint16).reshape(height, width),
                              tuple(all_targets), p)


# ---------------------------------------------------------------- components

def component_region(mask: ClassificationMask, code: int, seed_cell) -> np.ndarray:
    """Boolean map of the 4-connected set of cells with `code` containing seed_cell."""
    r, c = seed_cell
    if mask.fate[r, c] != code:
        return np.zeros(mask.fate.shape, dtype=bool)
    lab, _ = ndimage.label(mask.fate == code)
    return lab == lab[r, c]


def cell_path(region: np.ndarray, start, goals) -> list:
    """Shortest 4-connected path of cells inside region from start to any goal cell."""
    goals = set(map(tuple, goals))
    h, w = region.shape
    prev = {tuple(start): None}
    q = deque([tuple(start)])
    while q:
        cur = q.popleft()
        if cur in goals:
            path = []
            while cur is not None:
                path.append(cur)
                cur = prev[cur]
            return path[::-1]
        r, c = cur
        for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nb[0] < h and 0 <= nb[1] < w and region[nb] and nb not in prev:
                prev[nb] = cur
                q.append(nb)
    return []


def in_component(m: MeromorphicMap, mask: ClassificationMask, region: np.ndarray,
                 target: Target, z: np.ndarray, ts: TargetSet, p: OrbitParams) -> np.ndarray:
    """Membership of points in the component: own fate plus connection to the region.

    A point counts if its orbit has the component's fate and either its cell lies in
    the flood-filled region or a neighbouring region cell is reached by a straight
    segment whose sample points all share the fate.
    """
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.size, dtype=bool)
    if z.size == 0:
        return out
    labs, _ = point_labels(m, z, ts, p)
    fate_ok = np.array([l is not None and l.same(target) for l in labs])
    row, col, inside = mask.cells_of(z)
    for i in np.flatnonzero(fate_ok & inside):
        r, c = row[i], col[i]
        if region[r, c]:
            out[i] = True
            continue
        nbs = [(r + dr, c + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
               if (dr or dc) and 0 <= r + dr < mask.height and 0 <= c + dc < mask.width
               and region[r + dr, c + dc]]
        for nb in nbs:
            ctr = mask.cell_center(*nb)
            seg = z[i] + (ctr - z[i]) * np.linspace(0.1, 1.0, 8)
            sl, _ = point_labels(m, seg, ts, p)
            if all(l is not None and l.same(target) for l in sl):
                out[i] = True
                break
    return out


# ---------------------------------------------------------------- preimages

def preimages_in_window(m: MeromorphicMap, w, window, grid_step: float = 0.5,
                        max_steps: int = 50, tol: float = 1e-9) -> list:
    """Solutions of f(z) = w in the window by damped Newton from pole and grid seeds."""
    w = complex(w)
    x0, y0, x1, y1 = window
    if not (x1 > x0 and y1 > y0):
        raise PreconditionError(f"malformed window {window!r}")
    seeds = []
    for p in poles_in_rect(m, (x0 - 1, y0 - 1, x1 + 1, y1 + 1)):
        seeds.extend(p + 0.3 * np.exp(1j * np.pi * np.arange(4) / 2))
        if abs(w) > 1:
            seeds.append(p - 1 / w)
            seeds.append(p + 1 / w)
    nx = max(2, int(round((x1 - x0) / grid_step)) + 1)
    ny = max(2, int(round((y1 - y0) / grid_step)) + 1)
    gx, gy = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny))
    z = np.concatenate([np.asarray(seeds, dtype=complex), (gx + 1j * gy).ravel()])
    z = _damped_newton(m, z, w, max_steps)
    f = evaluate(m, z)[0]
    ok = np.isfinite(z) & (chordal_array(f, w) <= tol)
    ok &= (z.real >= x0) & (z.real <= x1) & (z.imag >= y0) & (z.imag <= y1)
    sols = np.sort_complex(z[ok])
    out = []
    for s in sols:
        if not any(abs(s - q) <= 1e-7 for q in out[-8:]):
            out.append(complex(s))
    # the sort above groups by real part only approximately; dedupe globally
    final = []
    for s in out:
        if all(abs(s - q) > 1e-7 for q in final):
            final.append(s)
    return sorted(final, key=lambda c: (c.real, c.imag))


def _damped_newton(m: MeromorphicMap, z: np.ndarray, w: complex, max_steps: int) -> np.ndarray:
    z = z.copy()
    active = np.arange(z.size)
    for _ in range(max_steps):
        if active.size == 0:
            break
        za = z[active]
        f, df = evaluate(m, za)
        with np.errstate(all="ignore"):
            r = f - w
            res = np.abs(r)
            step = r / df
        good = np.isfinite(step) & np.isfinite(res)
        done = good & (res <= 1e-14 * max(1.0, abs(w)))
        lam = np.ones(za.size)
        trial = za - step
        with np.errstate(all="ignore"):
            tres = np.abs(evaluate(m, trial)[0] - w)
        worse = good & ~done & ~(tres < res)
        for _ in range(10):
            if not worse.any():
                break
            lam[worse] *= 0.5
            trial[worse] = za[worse] - lam[worse] * step[worse]
            with np.errstate(all="ignore"):
                tres[worse] = np.abs(evaluate(m, trial[worse])[0] - w)
            worse = worse & ~(tres < res)
        move = good & ~done & ~worse
        z[active[move]] = trial[move]
        stalled = ~good | worse
        z[active[~good]] = np.nan
        active = active[move & ~stalled]
    return z


# ---------------------------------------------------------------- degree

@dataclass(frozen=True)
class DegreeEstimate:
    value: object
    counts: tuple
    windows: tuple
    preimages: tuple


def default_windows(n: int = 4, start: float = 10.0) -> list:
    return [(-start * 2**i, -start * 2**i, start * 2**i, start * 2**i) for i in range(n)]


def component_preimages(m: MeromorphicMap, target: Target, probe, w, windows,
                        resolution: int = 400, p: OrbitParams = OrbitParams(), workers: int = 1):
    """Per window: the preimages of w inside the component containing `probe`."""
    big = windows[-1]
    sols = np.array(preimages_in_window(m, w, big), dtype=complex)
    ts = default_targets(m, big)
    per_window = []
    for win in windows:
        mask = classify_grid(m, win, resolution, resolution, p, workers, targets=ts)
        cell = mask.cell_of(probe)
        if cell is None:
            raise PreconditionError("probe lies outside the window")
        region = component_region(mask, mask.code_of(target), cell)
        x0, y0, x1, y1 = win
        inwin = sols[(sols.real >= x0) & (sols.real <= x1) & (sols.imag >= y0) & (sols.imag <= y1)]
        member = in_component(m, mask, region, target, inwin, ts, p)
        per_window.append(tuple(complex(s) for s in inwin[member]))
    return per_window


def degree_on_component(m: MeromorphicMap, target: Target, probe, windows=None,
                        resolution: int = 400, p: OrbitParams = OrbitParams(),
                        workers: int = 1) -> DegreeEstimate:
    """Number of preimages of the probe inside its component, over doubling windows."""
    windows = list(windows or default_windows())
    res = classify_point(m, probe, default_targets(m, windows[-1]), p)
    if res.target is None or not res.target.same(target):
        raise PreconditionError(f"probe {probe} is not in component {target.label}")
    per = component_preimages(m, target, probe, probe, windows, resolution, p, workers)
    counts = tuple(len(s) for s in per)
    if counts[-1] == counts[-2]:
        value = counts[-1]
    elif counts[-1] > counts[-2]:
        value = INFINITE
    else:
        value = None
    return DegreeEstimate(value, counts, tuple(windows), per[-1])
