import colorsys
import math

import numpy as np
import pytest
from PIL import Image

from fatou_access.core import PreconditionError
from fatou_access.dynamics import ClassificationMask, OrbitParams, Target, classify_grid
from fatou_access.maps import Direction, parse_map_spec
from fatou_access.render import PRESETS, Palette, get_preset, mask_to_rgb, render_mask, render_preset


def _mask(fate, steps=None, targets=()):
    fate = np.asarray(fate, dtype=np.uint16)
    steps = np.zeros_like(fate) if steps is None else np.asarray(steps, dtype=np.uint16)
    h, w = fate.shape
    return ClassificationMask("z-tan", (0.0, 0.0, 1.0, 1.0), w, h, fate, steps, tuple(targets))


def test_single_pixel_png(tmp_path):
    out = render_mask(_mask([[1]]), Palette(), tmp_path / "one.png")
    img = Image.open(out)
    assert img.size == (1, 1) and img.mode == "RGB"
    assert img.getpixel((0, 0)) == (0, 0, 0)


def test_fixed_colours_for_julia_and_unresolved():
    rgb = mask_to_rgb(_mask([[0, 1]]), Palette())
    assert tuple(rgb[0, 0]) == (128, 128, 128) and tuple(rgb[0, 1]) == (0, 0, 0)


def test_distinct_targets_get_distinct_hues():
    targets = [Target("fixed", complex(k)) for k in range(12)]
    lut = Palette().base_colors(targets)[2:]
    hues = [colorsys.rgb_to_hsv(*(c / 255.0))[0] for c in lut.astype(float)]
    gaps = [min(abs(a - b), 1 - abs(a - b)) for i, a in enumerate(hues) for b in hues[i + 1:]]
    assert min(gaps) > 0.02
    assert len({tuple(c) for c in lut}) == 12


def test_periodic_palette_merges_translates():
    period = 2j * math.pi
    targets = [Target("baker", None, Direction.RIGHT, k) for k in (-1, 0, 1)] + \
              [Target("fixed", 3 + 2j * math.pi * k) for k in (0, 1)]
    lut = Palette("periodic").base_colors(targets, period)[2:]
    assert len({tuple(c) for c in lut[:3]}) == 1
    assert tuple(lut[3]) == tuple(lut[4]) != tuple(lut[0])


def test_shading_darkens_slow_orbits():
    targets = [Target("fixed", 0j)]
    rgb = mask_to_rgb(_mask([[2, 2]], [[1, 400]], targets), Palette())
    assert rgb[0, 1].sum() < rgb[0, 0].sum()


def test_palette_validated():
    with pytest.raises(PreconditionError):
        Palette("rainbow")
    with pytest.raises(PreconditionError):
        Palette(gamma=0)


def test_render_deterministic(tmp_path):
    m = parse_map_spec("z-tan")
    mask = classify_grid(m, (-4, -4, 4, 4), 64, 64)
    a = render_mask(mask, Palette(), tmp_path / "a.png").read_bytes()
    b = render_mask(classify_grid(m, (-4, -4, 4, 4), 64, 64, workers=4), Palette(), tmp_path / "b.png").read_bytes()
    assert a == b


def test_render_rows_top_first(tmp_path):
    targets = [Target("fixed", 0j), Target("fixed", 1 + 0j)]
    fate = np.array([[2], [3]])
    img = Image.open(render_mask(_mask(fate, targets=targets), Palette(), tmp_path / "t.png"))
    lut = Palette().base_colors(targets)
    assert img.getpixel((0, 0)) == tuple(int(v) for v in lut[2])


def test_unwritable_path_raises_oserror(tmp_path):
    with pytest.raises(OSError, match="nope"):
        render_mask(_mask([[1]]), Palette(), tmp_path / "nope" / "x.png")


def test_presets():
    assert set(PRESETS) == {"fig1-bd", "fig2-brown", "fig3-sine", "fig4-tanplus", "fig5-newtonexp"}
    for pr in PRESETS.values():
        parse_map_spec(pr.spec)
        x0, y0, x1, y1 = pr.rect
        assert x0 < x1 and y0 < y1 and pr.resolution >= 400
    with pytest.raises(PreconditionError):
        get_preset("fig9")


def test_fig1_translation_symmetry_in_pixels(tmp_path):
    out = render_preset("fig1-bd", tmp_path / "fig1.png", workers=4)
    a = np.asarray(Image.open(out))
    # rect height 4 pi over 400 rows: 2 pi i is exactly 200 rows
    assert np.array_equal(a[:200], a[200:])
