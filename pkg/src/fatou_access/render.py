"""PNG rendering of classification masks and the figure presets."""

from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import PreconditionError
from .dynamics import (
    FIRST_TARGET_CODE,
    JULIA_CODE,
    UNRESOLVED_CODE,
    ClassificationMask,
    OrbitParams,
    Target,
    classify_grid,
)
from .maps import MeromorphicMap, parse_map_spec

GOLDEN_ANGLE = (3 - math.sqrt(5)) * 180.0  # degrees


@dataclass(frozen=True)
class Palette:
    """Colours per fate code with step-count shading (darker = slower).

    mode "distinct" gives every code its own hue. mode "periodic" gives translates of
    the same target under the map's period one hue, so periodic pictures repeat.
    """

    mode: str = "distinct"
    gamma: float = 0.6
    shade: float = 0.7
    julia: tuple = (0, 0, 0)
    unresolved: tuple = (128, 128, 128)

    def __post_init__(self):
        if self.mode not in ("distinct", "periodic"):
            raise PreconditionError(f"unknown palette mode {self.mode!r}")
        if not self.gamma > 0 or not 0 <= self.shade < 1:
            raise PreconditionError("palette needs gamma > 0 and 0 <= shade < 1")

    def _keys(self, targets, period):
        if self.mode == "distinct" or period is None:
            return list(range(len(targets)))
        keys = [_reduce(t, period) for t in targets]
        uniq = sorted(set(keys))
        return [uniq.index(k) for k in keys]

    def base_colors(self, targets, period: complex | None = None) -> np.ndarray:
        """(FIRST_TARGET_CODE + n, 3) uint8 table indexed by fate code."""
        lut = np.zeros((FIRST_TARGET_CODE + len(targets), 3), dtype=np.uint8)
        lut[UNRESOLVED_CODE] = self.unresolved
        lut[JULIA_CODE] = self.julia
        for i, k in enumerate(self._keys(targets, period)):
            h = (k * GOLDEN_ANGLE % 360.0) / 360.0
            r, g, b = colorsys.hsv_to_rgb(h, 0.65, 0.95)
            lut[FIRST_TARGET_CODE + i] = (round(r * 255), round(g * 255), round(b * 255))
        return lut

    def shading(self, steps: np.ndarray, max_iter: int) -> np.ndarray:
        t = np.clip(steps.astype(np.float64) / max(1, max_iter), 0.0, 1.0)
        return 1.0 - self.shade * t ** self.gamma


def _reduce(t: Target, period: complex):
    """Sort key of the target's representative modulo the period."""
    if t.kind == "fixed":
        if period.imag == 0:
            n = math.floor(t.point.real / period.real + 0.5)
        else:
            n = math.floor(t.point.imag / period.imag + 0.5)
        p = t.point - n * period
        return (0, round(p.real, 6), round(p.imag, 6), "")
    return (1, 0.0, 0.0, t.direction.value)


def mask_to_rgb(mask: ClassificationMask, palette: Palette, period: complex | None = None) -> np.ndarray:
    lut = palette.base_colors(mask.targets, period)
    rgb = lut[mask.fate.astype(np.intp)].astype(np.float64)
    factor = palette.shading(mask.steps, mask.params.max_iter)
    shaded = mask.fate >= FIRST_TARGET_CODE
    rgb[shaded] *= factor[shaded][:, None]
    return np.rint(rgb).astype(np.uint8)


def render_mask(mask: ClassificationMask, palette: Palette, out, period: complex | None = None) -> Path:
    """Write the mask as an 8-bit RGB PNG, one pixel per cell, top row first."""
    out = Path(out)
    img = Image.fromarray(mask_to_rgb(mask, palette, period), mode="RGB")
    try:
        img.save(out, format="PNG", optimize=False, compress_level=9)
    except OSError as exc:
        raise OSError(f"cannot write image {out}: {exc.strerror or exc}") from exc
    return out


@dataclass(frozen=True)
class FigurePreset:
    id: str
    spec: str
    rect: tuple
    resolution: int
    palette: str
    caption: str


PRESETS = {
    p.id: p
    for p in (
        FigurePreset("fig1-bd", "z+exp(-z)", (-3.0, -2 * math.pi, 9.0, 2 * math.pi), 400, "periodic",
                     "Baker domains U_k of z + exp(-z) with their 2*pi*i translates (approximate window)"),
        FigurePreset("fig2-brown", "newton:1+z*exp", (-6.0, -5.0, 4.0, 5.0), 400, "distinct",
                     "Basins of Newton's method for 1 + z exp(z) (approximate window)"),
        FigurePreset("fig3-sine", "z-tan", (-7.0, -7.0, 7.0, 7.0), 400, "distinct",
                     "Invariant basins U_k of k*pi for z - tan z (approximate window)"),
        FigurePreset("fig4-tanplus", "z+i+tan", (-6.0, -6.0, 6.0, 6.0), 400, "distinct",
                     "Baker domain U and strip components U_k of z + i + tan z (approximate window)"),
        FigurePreset("fig5-newtonexp", "newton:z+exp", (-8.0, -6.0, 4.0, 6.0), 400, "distinct",
                     "Basins of Newton's method for z + exp(z) (approximate window)"),
    )
}


def get_preset(preset_id: str) -> FigurePreset:
    try:
        return PRESETS[preset_id]
    except KeyError:
        raise PreconditionError(f"unknown preset {preset_id!r}; choose from {', '.join(PRESETS)}") from None


def preset_mask(preset: FigurePreset, p: OrbitParams = OrbitParams(), workers: int = 1) -> ClassificationMask:
    m = parse_map_spec(preset.spec)
    return classify_grid(m, preset.rect, preset.resolution, preset.resolution, p, workers)


def render_preset(preset_id: str, out, p: OrbitParams = OrbitParams(), workers: int = 1,
                  mask: ClassificationMask | None = None) -> Path:
    preset = get_preset(preset_id)
    if mask is None:
        mask = preset_mask(preset, p, workers)
    m: MeromorphicMap = parse_map_spec(preset.spec)
    return render_mask(mask, Palette(preset.palette), out, m.period)
