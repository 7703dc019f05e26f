"""Channels to infinity, their invariance, accessible poles and singularity estimates.

Accesses are realized as radial channels: maximal arcs of a circle |z| = R whose
sample points belong to the component, chained across increasing radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import PreconditionError
from .dynamics import (
    ClassificationMask,
    DegreeEstimate,
    OrbitParams,
    Target,
    TargetSet,
    cell_path,
    component_preimages,
    component_region,
    default_targets,
    default_windows,
    point_labels,
)
from .maps import MeromorphicMap, evaluate, residue_order

MIN_ARC_SAMPLES = 2
MIN_CHAIN_RADII = 3
CLUSTER_MIN = 5
WALK_STEPS = 64


class DataQualityError(RuntimeError):
    """Too many samples failed to evaluate."""


class InconclusiveError(RuntimeError):
    """Not enough data to reach a verdict."""


class Verdict(Enum):
    STABLE = "stable"
    GROWING = "growing"
    UNRESOLVED = "unresolved"


class Invariance(Enum):
    INVARIANT = "invariant"
    NOT_INVARIANT = "not_invariant"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class ChannelSection:
    radius: float
    theta_lo: float
    theta_hi: float
    k_lo: int
    k_hi: int
    samples: int
    component: Target
    midpoint: complex

    @property
    def width(self) -> int:
        return (self.k_hi - self.k_lo) % self.samples + 1

    def contains_angle(self, theta: float) -> bool:
        return self.angular_distance(theta) == 0.0

    def angular_distance(self, theta: float) -> float:
        """Angular distance from theta to the arc (0 inside); arcs run counterclockwise."""
        step = 2 * math.pi / self.samples
        lo = self.theta_lo - step / 2
        span = self.width * step
        rel = (theta - lo) % (2 * math.pi)
        if rel <= span:
            return 0.0
        return min(rel - span, 2 * math.pi - rel)


@dataclass(frozen=True)
class AccessEstimate:
    component: Target
    radii: tuple
    counts: tuple
    sections: tuple
    links: tuple
    chains: tuple
    verdict: Verdict
    k: int | None = None
    unassigned_fraction: float = 0.0

    @property
    def label(self) -> str:
        if self.verdict is Verdict.STABLE:
            return f"STABLE({self.k})"
        return self.verdict.name


@dataclass(frozen=True)
class PoleAccess:
    pole: complex
    accessible: bool
    witness_cells: tuple = ()
    witness_curve: tuple = ()
    method: str = ""


@dataclass(frozen=True)
class PoleAccessReport:
    component: Target
    poles: tuple = field(default_factory=tuple)

    @property
    def accessible(self) -> list:
        return [pa.pole for pa in self.poles if pa.accessible]


# ---------------------------------------------------------------- circles

def _runs(member: np.ndarray) -> list:
    """Maximal runs of True in a cyclic boolean array, as (start, end) inclusive."""
    n = member.size
    if member.all():
        return [(0, n - 1)]
    if not member.any():
        return []
    start = int(np.flatnonzero(~member)[0]) + 1
    rolled = np.roll(member, -start)
    out = []
    i = 0
    while i < n:
        if rolled[i]:
            j = i
            while j + 1 < n and rolled[j + 1]:
                j += 1
            out.append(((i + start) % n, (j + start) % n))
            i = j + 1
        else:
            i += 1
    return sorted(out)


def _targets_for_radius(m: MeromorphicMap, R: float) -> TargetSet:
    return default_targets(m, (-R, -R, R, R))


def _classify_on(m, component: Target, z, ts, p):
    labs, err = point_labels(m, z, ts, p)
    member = np.array([l is not None and l.same(component) for l in labs])
    unresolved = np.array([l is None for l in labs])
    return member, unresolved, err


def channel_sections(m: MeromorphicMap, component: Target, R: float, M: int = 2048,
                     p: OrbitParams = OrbitParams(), targets: TargetSet | None = None,
                     _stats: dict | None = None) -> list:
    """Arcs of |z| = R (M samples) whose points all have the component's fate."""
    if M < 360:
        raise PreconditionError("at least 360 samples per circle are needed")
    ts = targets or _targets_for_radius(m, R)
    theta = 2 * np.pi * np.arange(M) / M
    z = R * np.exp(1j * theta)
    member, unresolved, err = _classify_on(m, component, z, ts, p)
    if _stats is not None:
        _stats["errors"] = _stats.get("errors", 0) + int(err.sum())
        _stats["unassigned"] = _stats.get("unassigned", 0) + int(unresolved.sum())
        _stats["samples"] = _stats.get("samples", 0) + M
    out = []
    for lo, hi in _runs(member):
        width = (hi - lo) % M + 1
        if width < MIN_ARC_SAMPLES:
            continue
        mid = (lo + (width - 1) / 2) % M
        tm = 2 * math.pi * mid / M
        out.append(ChannelSection(float(R), float(theta[lo]), float(theta[hi]), lo, hi, M,
                                  component, complex(R * math.cos(tm), R * math.sin(tm))))
    return out


def _arc_at(sections, theta: float):
    for i, s in enumerate(sections):
        if s.contains_angle(theta):
            return i
    return None


def _walk(m, component, start_r: float, end_r: float, theta: float, ts, p) -> bool:
    """Membership of WALK_STEPS points on the ray at angle theta between two radii."""
    rs = start_r + (end_r - start_r) * np.arange(1, WALK_STEPS + 1) / WALK_STEPS
    pts = rs * np.exp(1j * theta)
    member, _, _ = _classify_on(m, component, pts, ts, p)
    return bool(member.all())


def count_accesses(m: MeromorphicMap, component: Target, radii, M: int = 2048,
                   p: OrbitParams = OrbitParams()) -> AccessEstimate:
    """Channel counts per radius, chained inward by radial walks, with a verdict."""
    radii = tuple(float(r) for r in radii)
    if len(radii) < 4 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise PreconditionError("need at least 4 increasing radii")
    ts = _targets_for_radius(m, radii[-1])
    stats = {}
    sections = tuple(tuple(channel_sections(m, component, R, M, p, ts, stats)) for R in radii)
    if stats["errors"] > 0.01 * stats["samples"]:
        raise DataQualityError(f"{stats['errors']} of {stats['samples']} samples failed to evaluate")

    # links[i][j] = index of the arc at radii[i] reached from arc j at radii[i+1]
    links = []
    for i in range(len(radii) - 1):
        inner, outer = sections[i], sections[i + 1]
        row = []
        for s in outer:
            th = math.atan2(s.midpoint.imag, s.midpoint.real)
            ok = _walk(m, component, radii[i + 1], radii[i], th, ts, p)
            row.append(_arc_at(inner, th % (2 * math.pi)) if ok else None)
        links.append(tuple(row))
    links = tuple(links)

    chains = []
    last = len(radii) - 1
    for j in range(len(sections[last])):
        chain = [(last, j)]
        cur = j
        for i in range(last - 1, -1, -1):
            nxt = links[i][cur]
            if nxt is None:
                break
            chain.append((i, nxt))
            cur = nxt
        if len(chain) >= MIN_CHAIN_RADII:
            chains.append(tuple(reversed(chain)))
    chains = tuple(chains)

    counts = tuple(len(s) for s in sections)
    tail = counts[-3:]
    verdict, k = Verdict.UNRESOLVED, None
    if tail[0] == tail[1] == tail[2]:
        bijective = True
        for i in (len(radii) - 3, len(radii) - 2):
            row = links[i]
            if any(x is None for x in row) or len(set(row)) != len(row) or len(row) != counts[i]:
                bijective = False
        if bijective:
            verdict, k = Verdict.STABLE, tail[0]
    elif tail[0] < tail[1] < tail[2]:
        verdict = Verdict.GROWING
    unres = stats["unassigned"] / stats["samples"]
    return AccessEstimate(component, radii, counts, sections, links, chains, verdict, k, unres)


def chain_sections(est: AccessEstimate, chain) -> list:
    return [est.sections[i][j] for i, j in chain]


def _chain_of(est: AccessEstimate, radius_index: int, arc_index: int):
    for c, chain in enumerate(est.chains):
        if (radius_index, arc_index) in chain:
            return c
    return None


def _locate(m, est: AccessEstimate, u: complex, ts, p):
    """(radius index, arc index) of the channel containing u after a radial walk, or None."""
    r = abs(u)
    th = math.atan2(u.imag, u.real) % (2 * math.pi)
    i = int(np.argmin([abs(R - r) for R in est.radii]))
    R = est.radii[i]
    if not _walk(m, est.component, r, R, th, ts, p):
        return None
    j = _arc_at(est.sections[i], th)
    return None if j is None else (i, j)


def access_invariance(m: MeromorphicMap, est: AccessEstimate, chain_index: int,
                      p: OrbitParams = OrbitParams()) -> Invariance:
    """Whether f maps the tail of a channel chain back into the same chain."""
    if est.verdict is not Verdict.STABLE:
        raise PreconditionError("invariance needs a STABLE access estimate")
    chain = est.chains[chain_index]
    verts = np.array([s.midpoint for s in chain_sections(est, chain)], dtype=complex)
    images = evaluate(m, verts)[0]
    ts = _targets_for_radius(m, est.radii[-1] * 1.5)
    seen = set()
    for u in images[-3:]:
        if not np.isfinite(u):
            return Invariance.UNRESOLVED
        loc = _locate(m, est, complex(u), ts, p)
        if loc is None:
            return Invariance.UNRESOLVED
        c = _chain_of(est, *loc)
        if c is None:
            return Invariance.UNRESOLVED
        seen.add(c)
    if seen == {chain_index}:
        return Invariance.INVARIANT
    return Invariance.NOT_INVARIANT


# ---------------------------------------------------------------- poles

def _continue_preimage(m, p_pole: complex, path_w: np.ndarray, branch: complex, order: int,
                       r: complex, tol: float = 1e-10):
    """Follow the solution of f(z) = W(s) near the pole from the far end of the path inward.

    Returns the list of solutions (same order as path_w) or None if Newton fails.
    """
    W0 = path_w[0]
    z = p_pole + branch * (r / W0) ** (1.0 / order)
    out = []
    for W in path_w:
        for _ in range(40):
            f, df = evaluate(m, np.array([z]))
            f, df = complex(f[0]), complex(df[0])
            if not (np.isfinite(f) and np.isfinite(df)) or df == 0:
                return None
            dz = (f - W) / df
            z -= dz
            if abs(dz) < 1e-15 * max(1.0, abs(z)):
                break
        f = complex(evaluate(m, np.array([z]))[0][0])
        if not np.isfinite(f) or abs(f - W) > tol * max(1.0, abs(W)):
            return None
        out.append(z)
    return out


def _escape_path(est: AccessEstimate, chain, seed: complex, step: float = 0.02) -> np.ndarray:
    """Polyline from the chain's outermost midpoint down to the seed, finely sampled."""
    mids = [s.midpoint for s in chain_sections(est, chain)]
    pts = [mids[-1]]
    verts = mids[::-1] + [seed]
    for a, b in zip(verts, verts[1:]):
        n = max(8, int(abs(b - a) / step))
        pts.extend(a + (b - a) * np.arange(1, n + 1) / n)
    return np.array(pts, dtype=complex)


def accessible_poles(m: MeromorphicMap, mask: ClassificationMask, component: Target, poles,
                     seed=None, estimate: AccessEstimate | None = None,
                     p: OrbitParams = OrbitParams(), min_resolution: int = 400) -> PoleAccessReport:
    """Which poles can be reached from the component's seed cell inside the component.

    A pole is accessible when a 4-connected path of component cells joins the seed
    cell to a cell adjacent to the pole's cell. Component cusps narrower than a cell
    hide such paths, so when channel chains are supplied the pole is also tested by
    pulling a chain back through the pole: the solution of f(z) = W near the pole,
    followed as W moves from far out along the chain to the seed, must enter the
    flood-filled region while every visited point keeps the component's fate.
    """
    if mask.width < min_resolution or mask.height < min_resolution:
        raise PreconditionError(f"mask resolution must be at least {min_resolution}x{min_resolution}")
    x0, y0, x1, y1 = mask.rect
    poles = [complex(q) for q in poles]
    for q in poles:
        if not (x0 + 1 <= q.real <= x1 - 1 and y0 + 1 <= q.imag <= y1 - 1):
            raise PreconditionError(f"pole {q} is not inside the mask with margin 1")
    if seed is None:
        if component.kind != "fixed":
            raise PreconditionError("a seed point is needed for Baker components")
        seed = component.point
    seed = complex(seed)
    seed_cell = mask.cell_of(seed)
    if seed_cell is None:
        raise PreconditionError("seed point lies outside the mask")
    code = mask.code_of(component)
    region = component_region(mask, code, seed_cell)
    if not region.any():
        raise PreconditionError(f"seed cell is not classified {component.label}")
    ts = default_targets(m, mask.rect)
    out = []
    for q in poles:
        r, c = mask.cell_of(q)
        nbs = [(r + dr, c + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
               if (dr or dc) and 0 <= r + dr < mask.height and 0 <= c + dc < mask.width
               and region[r + dr, c + dc]]
        if nbs:
            path = cell_path(region, seed_cell, nbs)
            out.append(PoleAccess(q, True, tuple(path), (), "cells"))
            continue
        found = None
        if estimate is not None:
            found = _pullback_witness(m, mask, region, component, q, seed, estimate, ts, p)
        if found is not None:
            cells, curve = found
            out.append(PoleAccess(q, True, tuple(cells), tuple(curve), "pullback"))
        else:
            out.append(PoleAccess(q, False, (), (), ""))
    return PoleAccessReport(component, tuple(out))


def _pullback_witness(m, mask, region, component, q, seed, est, ts, p):
    order, r = residue_order(m, q)
    for chain in est.chains:
        path = _escape_path(est, chain, seed)
        wl, _ = point_labels(m, path, ts, p)
        if not all(l is not None and l.same(component) for l in wl):
            continue
        coarse = _escape_path(est, chain, seed, step=0.25)
        for j in range(order):
            branch = np.exp(2j * np.pi * j / order)
            sols = _continue_preimage(m, q, coarse, branch, order, r)
            if sols is None:
                continue
            sols = np.array(sols)
            rows, cols, inside = mask.cells_of(sols)
            hit = np.flatnonzero(inside & region[np.clip(rows, 0, mask.height - 1),
                                                 np.clip(cols, 0, mask.width - 1)])
            if hit.size == 0:
                continue
            link = hit[0]
            curve = sols[:link + 1]
            if abs(curve[0] - q) > 0.05:
                continue
            labs, _ = point_labels(m, curve, ts, p)
            if not all(l is not None and l.same(component) for l in labs):
                continue
            cells = cell_path(region, mask.cell_of(seed), [(rows[link], cols[link])])
            if not cells:
                continue
            return cells, [complex(z) for z in curve[::-1]]
    return None


# ---------------------------------------------------------------- singularities

@dataclass(frozen=True)
class SingularityEstimate:
    value: int
    clusters: dict
    preimages: tuple


def singularity_count_estimate(m: MeromorphicMap, component: Target, w, estimate: AccessEstimate,
                               windows=None, probe=None, resolution: int = 400,
                               p: OrbitParams = OrbitParams(), degree: DegreeEstimate | None = None,
                               workers: int = 1) -> SingularityEstimate:
    """Number of accumulation clusters (>= 5 members) of in-component preimages of w.

    Preimages beyond the smallest channel radius are assigned to the angularly
    nearest channel at the nearest radius; bounded ones to their nearest pole.
    The component is located through `probe`, which defaults to w itself.
    """
    windows = list(windows or default_windows())
    if degree is not None and degree.value != "infinite":
        raise PreconditionError("singularity estimate needs a component of infinite degree")
    if estimate.component != component:
        raise PreconditionError("access data belongs to a different component")
    probe = complex(w if probe is None else probe)
    per = component_preimages(m, component, probe, w, windows, resolution, p, workers)
    pre = per[-1]
    if len(pre) < 10:
        raise InconclusiveError(f"only {len(pre)} in-component preimages found")
    big = windows[-1]
    x0, y0, x1, y1 = big
    from .maps import poles_in_rect
    poles = poles_in_rect(m, (x0 - 1, y0 - 1, x1 + 1, y1 + 1))
    R0 = estimate.radii[0]
    clusters = {}
    for z in pre:
        if abs(z) >= R0:
            i = int(np.argmin([abs(R - abs(z)) for R in estimate.radii]))
            th = math.atan2(z.imag, z.real) % (2 * math.pi)
            secs = estimate.sections[i]
            if not secs:
                key = ("far", round(th, 1))
            else:
                j = int(np.argmin([s.angular_distance(th) for s in secs]))
                c = _chain_of(estimate, i, j)
                key = ("channel", c) if c is not None else ("arc", i, j)
        elif poles:
            key = ("pole", int(np.argmin([abs(z - q) for q in poles])))
        else:
            key = ("bounded", 0)
        clusters.setdefault(key, []).append(z)
    value = sum(1 for v in clusters.values() if len(v) >= CLUSTER_MIN)
    return SingularityEstimate(value, {k: len(v) for k, v in clusters.items()}, tuple(pre))
