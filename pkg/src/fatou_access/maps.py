"""Registry of the concrete meromorphic maps and the Newton-map constructor.

Every map carries closed-form evaluators, its pole lattice, fixed points,
asymptotic drifts and (where known) absorbing regions used to certify
Baker-domain escape in directions where the drift vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.special import lambertw

from .core import INF, OVERFLOW, EvaluationError, PreconditionError, to_sphere


class Direction(Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"


UNIT = {Direction.UP: 1j, Direction.DOWN: -1j, Direction.LEFT: -1.0, Direction.RIGHT: 1.0}


class EntireFamily(Enum):
    SIN = "sin"
    Z_PLUS_EXP = "z+exp"
    ONE_PLUS_Z_EXP = "1+z*exp"
    EXP_NEG_EXP = "exp(-exp)"
    POLY = "poly"


class MapFamily(Enum):
    Z_PLUS_TAN = "z+tan"
    Z_MINUS_TAN = "z-tan"
    Z_PLUS_I_PLUS_TAN = "z+i+tan"
    NEWTON_OF = "newton"
    RATIONAL = "rational"


@dataclass(frozen=True)
class EntireFunction:
    family: EntireFamily
    coeffs: tuple = ()

    def __post_init__(self):
        if self.family is EntireFamily.POLY:
            if not self.coeffs or self.coeffs[0] == 0:
                raise PreconditionError("POLY needs a nonzero leading coefficient")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        fam = self.family
        if fam is EntireFamily.SIN:
            return np.sin(z)
        if fam is EntireFamily.Z_PLUS_EXP:
            return z + np.exp(z)
        if fam is EntireFamily.ONE_PLUS_Z_EXP:
            return 1 + z * np.exp(z)
        if fam is EntireFamily.EXP_NEG_EXP:
            return np.exp(-np.exp(z))
        return np.polyval(np.asarray(self.coeffs, dtype=complex), z)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        fam = self.family
        if fam is EntireFamily.SIN:
            return np.cos(z)
        if fam is EntireFamily.Z_PLUS_EXP:
            return 1 + np.exp(z)
        if fam is EntireFamily.ONE_PLUS_Z_EXP:
            return (1 + z) * np.exp(z)
        if fam is EntireFamily.EXP_NEG_EXP:
            return -np.exp(z) * np.exp(-np.exp(z))
        return np.polyval(np.polyder(np.asarray(self.coeffs, dtype=complex)), z)


@dataclass(frozen=True)
class PoleLattice:
    """Poles base + k*period for all integers k."""

    base: complex
    period: complex


@dataclass(frozen=True)
class InvariantLine1D:
    line_id: str
    origin: complex
    direction: complex
    g: Callable
    dg: Callable

    def point(self, t):
        return self.origin + self.direction * np.asarray(t, dtype=float)


@dataclass(frozen=True, eq=False)
class MeromorphicMap:
    family: MapFamily
    spec: str
    kind: str
    entire: EntireFunction | None = None
    num: tuple = ()
    den: tuple = ()
    poles: PoleLattice | tuple = ()
    drifts: dict = field(default_factory=dict)
    period: complex | None = None

    def __call__(self, z):
        return evaluate(self, z)[0]

    def __repr__(self):
        return f"MeromorphicMap({self.spec!r})"


# ---------------------------------------------------------------- tan

_SPLIT = 5.0


def stable_tan(z):
    """Complex tangent; for |Im z| > 5 uses the real/imaginary split with e^{-2|y|}."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    with np.errstate(all="ignore"):
        near = np.tan(np.where(np.abs(y) <= _SPLIT, z, 0.0))
        q = np.exp(-2.0 * np.abs(y))
        den = 1.0 + 2.0 * np.cos(2 * x) * q + q * q
        far = (2.0 * np.sin(2 * x) * q + 1j * np.sign(y) * (1.0 - q * q)) / den
    return np.where(np.abs(y) <= _SPLIT, near, far)


def _tan_family(z, sign, shift):
    t = stable_tan(z)
    with np.errstate(all="ignore"):
        f = z + shift + sign * t
        df = 1.0 + sign * (1.0 + t * t)
    return f, df


# ---------------------------------------------------------------- Newton closed forms

def _newton_zexp(z):
    # e^z (z-1)/(e^z+1), written with e^{-z} on the right half-plane
    x = z.real
    with np.errstate(all="ignore"):
        right = x > 0
        e = np.exp(np.where(right, -z, z))
        f = np.where(right, (z - 1) / (1 + e), e * (z - 1) / (e + 1))
        df = np.where(right, (z * e + 1) / (1 + e) ** 2, (z + e) * e / (1 + e) ** 2)
    return f, df


_EXP_MAX = 700.0  # past this e^{-z} overflows; the map value is then beyond OVERFLOW anyway


def _newton_1zexp(z):
    with np.errstate(all="ignore"):
        e = np.exp(-z)
        f = z - (e + z) / (1 + z)
        df = (e + z) * (2 + z) / (1 + z) ** 2
    huge = -z.real > _EXP_MAX
    return np.where(huge, INF, f), np.where(huge, INF, df)


def _newton_expexp(z):
    with np.errstate(all="ignore"):
        e = np.exp(-z)
        f, df = z + e, 1 - e
    huge = -z.real > _EXP_MAX
    return np.where(huge, INF, f), np.where(huge, INF, df)


def _rational(z, num, den):
    n = np.asarray(num, dtype=complex)
    d = np.asarray(den, dtype=complex)
    with np.errstate(all="ignore"):
        pn, pd = np.polyval(n, z), np.polyval(d, z)
        dn, dd = np.polyval(np.polyder(n), z), np.polyval(np.polyder(d), z)
        f = pn / pd
        df = (dn * pd - pn * dd) / (pd * pd)
    return f, df


def _raw(m: MeromorphicMap, z):
    k = m.kind
    if k == "tan+":
        return _tan_family(z, 1.0, 0.0)
    if k == "tan-":
        return _tan_family(z, -1.0, 0.0)
    if k == "tan+i":
        return _tan_family(z, 1.0, 1j)
    if k == "newton_zexp":
        return _newton_zexp(z)
    if k == "newton_1zexp":
        return _newton_1zexp(z)
    if k == "newton_expexp":
        return _newton_expexp(z)
    return _rational(z, m.num, m.den)


def evaluate(m: MeromorphicMap, z):
    """Vectorized (f, f') with overflow and poles normalized to INF.

    NaN results are left as NaN so that array callers can flag them; use
    evaluate_with_derivative for the checked scalar form.
    """
    z = np.asarray(z, dtype=complex)
    f, df = _raw(m, z)
    f = np.asarray(f, dtype=complex)
    df = np.asarray(df, dtype=complex)
    with np.errstate(invalid="ignore", over="ignore"):
        big = ~np.isnan(f) & (np.isinf(f) | (np.abs(f) > OVERFLOW))
        dbig = ~np.isnan(df) & (np.isinf(df) | (np.abs(df) > OVERFLOW))
    f = np.where(big, INF, f)
    df = np.where(big | dbig, INF, df)
    # an infinite input is only meaningful for rational maps; leave it to the scalar path
    return f, df


def evaluate_with_derivative(m: MeromorphicMap, z) -> tuple:
    z = to_sphere(z)
    if math.isinf(z.real):
        if m.kind != "rational":
            raise EvaluationError(f"{m.spec} has an essential singularity at infinity")
        return _rational_at_inf(m)
    f, df = evaluate(m, np.array([z]))
    f, df = complex(f[0]), complex(df[0])
    if math.isnan(f.real) or math.isnan(f.imag) or math.isnan(df.real) or math.isnan(df.imag):
        raise EvaluationError(f"{m.spec} evaluated to NaN at {z}")
    return to_sphere(f), to_sphere(df)


def _rational_at_inf(m):
    num = np.trim_zeros(np.asarray(m.num, dtype=complex), "f")
    den = np.trim_zeros(np.asarray(m.den, dtype=complex), "f")
    dn, dd = len(num) - 1, len(den) - 1
    if dn > dd:
        return INF, INF
    if dn == dd:
        return to_sphere(num[0] / den[0]), INF
    return 0j, INF


# ---------------------------------------------------------------- constructors

_TAN_DRIFTS = {
    "tan+": {Direction.UP: 1j, Direction.DOWN: -1j},
    "tan-": {Direction.UP: -1j, Direction.DOWN: 1j},
    "tan+i": {Direction.UP: 2j, Direction.DOWN: 0j},
}
_TAN_LATTICE = PoleLattice(math.pi / 2, math.pi)


def tan_map(family: MapFamily) -> MeromorphicMap:
    kind = {
        MapFamily.Z_PLUS_TAN: "tan+",
        MapFamily.Z_MINUS_TAN: "tan-",
        MapFamily.Z_PLUS_I_PLUS_TAN: "tan+i",
    }[family]
    return MeromorphicMap(family, family.value, kind, poles=_TAN_LATTICE,
                          drifts=dict(_TAN_DRIFTS[kind]), period=complex(math.pi))


def rational_map(num, den, spec: str | None = None, entire: EntireFunction | None = None):
    num = tuple(complex(c) for c in num)
    den = tuple(complex(c) for c in den)
    poles = _rational_poles(num, den)
    family = MapFamily.NEWTON_OF if entire is not None else MapFamily.RATIONAL
    if spec is None:
        spec = "rational:" + ",".join(_fmt(c) for c in num) + "/" + ",".join(_fmt(c) for c in den)
    return MeromorphicMap(family, spec, "rational", entire=entire, num=num, den=den, poles=poles)


def _fmt(c: complex) -> str:
    return repr(c.real) if c.imag == 0 else repr(c)


def _rational_poles(num, den) -> tuple:
    d = np.trim_zeros(np.asarray(den, dtype=complex), "f")
    if len(d) < 2:
        return ()
    roots = np.roots(d)
    out = []
    scale = max(1.0, float(np.max(np.abs(num))))
    for r in roots:
        if abs(np.polyval(np.asarray(num, dtype=complex), r)) <= 1e-9 * scale:
            continue
        if all(abs(r - q) > 1e-6 for q in out):
            out.append(complex(np.round(r.real, 14), np.round(r.imag, 14)))
    return tuple(sorted(out, key=lambda c: (c.real, c.imag)))


def newton_map(F: EntireFunction) -> MeromorphicMap:
    """The map z - F(z)/F'(z) in simplified closed form."""
    fam = F.family
    if fam is EntireFamily.SIN:
        m = tan_map(MapFamily.Z_MINUS_TAN)
        return MeromorphicMap(m.family, "newton:sin", m.kind, entire=F, poles=m.poles,
                              drifts=m.drifts, period=m.period)
    if fam is EntireFamily.Z_PLUS_EXP:
        return MeromorphicMap(MapFamily.NEWTON_OF, "newton:z+exp", "newton_zexp", entire=F,
                              poles=PoleLattice(1j * math.pi, 2j * math.pi),
                              drifts={Direction.UP: None, Direction.DOWN: None,
                                      Direction.RIGHT: -1.0})
    if fam is EntireFamily.ONE_PLUS_Z_EXP:
        return MeromorphicMap(MapFamily.NEWTON_OF, "newton:1+z*exp", "newton_1zexp", entire=F,
                              poles=(-1 + 0j,), drifts={Direction.UP: None, Direction.DOWN: None})
    if fam is EntireFamily.EXP_NEG_EXP:
        return MeromorphicMap(MapFamily.NEWTON_OF, "newton:exp(-exp)", "newton_expexp", entire=F,
                              poles=(), drifts={Direction.UP: None, Direction.DOWN: None,
                                                Direction.RIGHT: 0j},
                              period=2j * math.pi)
    if F.degree < 2:
        raise PreconditionError("Newton maps need a polynomial of degree >= 2")
    p = np.asarray(F.coeffs, dtype=complex)
    dp = np.polyder(p)
    num = np.polysub(np.polymul([1, 0], dp), p)
    spec = "newton:poly:" + ",".join(_fmt(complex(c)) for c in F.coeffs)
    m = rational_map(num, dp, spec=spec, entire=F)
    return MeromorphicMap(m.family, m.spec, m.kind, entire=F, num=m.num, den=m.den,
                          poles=m.poles, drifts={Direction.UP: None, Direction.DOWN: None})


def parse_map_spec(spec: str) -> MeromorphicMap:
    s = spec.strip().replace(" ", "")
    table = {
        "z+tan": lambda: tan_map(MapFamily.Z_PLUS_TAN),
        "z-tan": lambda: tan_map(MapFamily.Z_MINUS_TAN),
        "z+i+tan": lambda: tan_map(MapFamily.Z_PLUS_I_PLUS_TAN),
        "newton:sin": lambda: newton_map(EntireFunction(EntireFamily.SIN)),
        "newton:z+exp": lambda: newton_map(EntireFunction(EntireFamily.Z_PLUS_EXP)),
        "newton:1+z*exp": lambda: newton_map(EntireFunction(EntireFamily.ONE_PLUS_Z_EXP)),
        "newton:exp(-exp)": lambda: newton_map(EntireFunction(EntireFamily.EXP_NEG_EXP)),
        "z+exp(-z)": lambda: newton_map(EntireFunction(EntireFamily.EXP_NEG_EXP)),
    }
    if s in table:
        return table[s]()
    if s.startswith("newton:poly:"):
        try:
            coeffs = tuple(complex(c.replace("i", "j")) for c in s[len("newton:poly:"):].split(","))
        except ValueError:
            raise PreconditionError(f"bad polynomial coefficients in {spec!r}") from None
        return newton_map(EntireFunction(EntireFamily.POLY, coeffs))
    known = ", ".join(sorted(table)) + ", newton:poly:<c_n,...,c_0>"
    raise PreconditionError(f"unknown map spec {spec!r}; expected one of {known}")


# ---------------------------------------------------------------- poles

def _in_rect(z: complex, rect) -> bool:
    x0, y0, x1, y1 = rect
    return x0 <= z.real <= x1 and y0 <= z.imag <= y1


def _check_rect(rect):
    if len(rect) != 4 or not all(math.isfinite(v) for v in rect):
        raise PreconditionError(f"rect needs four finite numbers, got {rect!r}")
    x0, y0, x1, y1 = rect
    if x1 < x0 or y1 < y0:
        raise PreconditionError(f"rect corners out of order: {rect!r}")


def lattice_points(base: complex, period: complex, rect) -> list:
    x0, y0, x1, y1 = rect
    if period.imag == 0:
        lo, hi = (x0 - base.real) / period.real, (x1 - base.real) / period.real
    else:
        lo, hi = (y0 - base.imag) / period.imag, (y1 - base.imag) / period.imag
    ks = range(math.floor(min(lo, hi)) - 1, math.ceil(max(lo, hi)) + 2)
    return [base + k * period for k in ks if _in_rect(base + k * period, rect)]


def poles_in_rect(m: MeromorphicMap, rect) -> list:
    _check_rect(rect)
    if isinstance(m.poles, PoleLattice):
        pts = lattice_points(m.poles.base, m.poles.period, rect)
    else:
        pts = [p for p in m.poles if _in_rect(p, rect)]
    return sorted(pts, key=lambda c: (c.real, c.imag))


# ---------------------------------------------------------------- fixed points

def _polish(m: MeromorphicMap, z: complex, steps: int = 60) -> complex:
    """Newton iteration on f(z) - z."""
    for _ in range(steps):
        f, df = evaluate(m, np.array([z]))
        g, dg = complex(f[0]) - z, complex(df[0]) - 1.0
        if not np.isfinite(g) or dg == 0:
            break
        step = g / dg
        z -= step
        if abs(step) < 1e-16 * max(1.0, abs(z)):
            break
    return z


def _entire_zero_polish(F: EntireFunction, z: complex, steps: int = 60) -> complex:
    for _ in range(steps):
        step = complex(F(z)) / complex(F.derivative(z))
        z -= step
        if abs(step) < 1e-17 * max(1.0, abs(z)):
            break
    return z


def _lambert_points(arg: float, sign: float, rect) -> list:
    y_extent = max(abs(rect[1]), abs(rect[3]))
    K = int(y_extent / (2 * math.pi)) + 3
    pts = []
    for k in range(-K, K + 1):
        w = complex(lambertw(arg, k))
        pts.append(sign * w)
    return pts


def fixed_points_in_rect(m: MeromorphicMap, rect) -> list:
    """[(z, multiplier)] for every finite fixed point in rect, sorted by (Re, Im)."""
    _check_rect(rect)
    k = m.kind
    if k == "tan+i" or k == "newton_expexp":
        return []
    if k in ("tan+", "tan-"):
        cands = lattice_points(0j, complex(math.pi), rect)
    elif k == "newton_zexp":
        cands = [_entire_zero_polish(m.entire, c) for c in _lambert_points(1.0, -1.0, rect)]
    elif k == "newton_1zexp":
        cands = [_entire_zero_polish(m.entire, c) for c in _lambert_points(-1.0, 1.0, rect)]
    elif m.entire is not None and m.entire.family is EntireFamily.POLY:
        cands = [complex(r) for r in np.roots(np.asarray(m.entire.coeffs, dtype=complex))]
    else:
        fz = np.polysub(np.asarray(m.num, dtype=complex),
                        np.polymul([1, 0], np.asarray(m.den, dtype=complex)))
        cands = [_polish(m, complex(r)) for r in np.roots(np.trim_zeros(fz, "f"))]
    out = []
    for c in cands:
        if not _in_rect(c, rect):
            continue
        if any(abs(c - q) < 1e-7 for q, _ in out):
            continue
        f, df = evaluate(m, np.array([c]))
        if abs(complex(f[0]) - c) > 1e-10:
            continue
        out.append((c, complex(df[0])))
    return sorted(out, key=lambda t: (t[0].real, t[0].imag))


# ---------------------------------------------------------------- drifts, traps, lines

def asymptotic_drift(m: MeromorphicMap, direction: Direction):
    """Tabulated limit of f(z) - z as z runs off in the given direction, or None."""
    return m.drifts.get(direction)


def baker_drifts(m: MeromorphicMap) -> list:
    """Directions whose drift is nonzero and points outward: escape is detected by drift matching."""
    out = []
    for d, v in m.drifts.items():
        if v is None or v == 0:
            continue
        u = UNIT[d]
        if (v * u.conjugate()).real > 0:
            out.append(d)
    return sorted(out, key=lambda d: d.value)


_STRIP_TOP = -0.6
_TRAP_DEPTH = 3.0


def _strip_trap_down(z):
    # z + i + tan z below the real axis: f(z) - z ~ 2 e^{2y}(sin 2x + i cos 2x), whose flow
    # keeps y - (1/2) ln|sin 2x| constant. Forward orbits starting where the highest point
    # still to be reached lies below -3 stay in the strip and slide down towards s_k.
    x, y = z.real, z.imag
    k = np.floor(x / math.pi)
    u = x - k * math.pi
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.abs(np.sin(2 * u))
        peak = np.where(np.abs(u - math.pi / 2) <= math.pi / 4, y, y - 0.5 * np.log(s))
    # the half-strip |u - pi/2| < pi/8 maps into itself only below Im z ~ -0.54, so cut at -0.6
    in_s = (np.abs(u - math.pi / 2) < math.pi / 8) & (y < _STRIP_TOP)
    flow = (y < -_TRAP_DEPTH) & (peak < -_TRAP_DEPTH)
    return in_s | flow, np.nan_to_num(k).astype(np.int64)


def _right_trap_expexp(z):
    # z + e^{-z}: the flow of e^{-z} is e^{z(t)} = e^{z0} + t, so the smallest real part
    # ahead is x + ln|sin y| when cos y < 0 and x otherwise.
    x, y = z.real, z.imag
    k = np.round(y / (2 * math.pi))
    v = y - 2 * math.pi * k
    with np.errstate(divide="ignore", invalid="ignore"):
        xmin = np.where(np.cos(v) >= 0, x, x + np.log(np.abs(np.sin(v))))
    mask = xmin > _TRAP_DEPTH
    return mask, np.nan_to_num(k).astype(np.int64)


_TRAPS = {
    "tan+i": {Direction.DOWN: _strip_trap_down},
    "newton_expexp": {Direction.RIGHT: _right_trap_expexp},
}


def baker_traps(m: MeromorphicMap) -> dict:
    """Direction -> function z -> (mask, k) for absorbing regions of indexed Baker domains."""
    return dict(_TRAPS.get(m.kind, {}))


def trap_index_range(m: MeromorphicMap, direction: Direction, rect) -> range:
    x0, y0, x1, y1 = rect
    if m.kind == "tan+i":
        return range(math.floor(x0 / math.pi), math.floor(x1 / math.pi) + 1)
    if m.kind == "newton_expexp":
        return range(round(y0 / (2 * math.pi)), round(y1 / (2 * math.pi)) + 1)
    return range(0)


def _line_table(kind: str):
    # line id prefix -> (Re offset, g, g')
    tanh, coth = np.tanh, lambda t: 1 / np.tanh(t)
    csch2 = lambda t: 1 / np.sinh(t) ** 2
    sech2 = lambda t: 1 / np.cosh(t) ** 2
    if kind == "tan-":
        return {
            "r": (math.pi / 2, lambda t: t - coth(t), lambda t: 1 + csch2(t)),
            "l": (0.0, lambda t: t - tanh(t), lambda t: 1 - sech2(t)),
        }
    if kind == "tan+":
        return {
            "r": (math.pi / 2, lambda t: t + coth(t), lambda t: 1 - csch2(t)),
            "l": (0.0, lambda t: t + tanh(t), lambda t: 1 + sech2(t)),
        }
    if kind == "tan+i":
        return {
            "s": (math.pi / 2, lambda t: t + 1 + coth(t), lambda t: 1 - csch2(t)),
            "l": (0.0, lambda t: t + 1 + tanh(t), lambda t: 1 + sech2(t)),
        }
    return {}


def invariant_line_map(m: MeromorphicMap, line_id: str) -> InvariantLine1D:
    """Vertical invariant lines Re z = offset + k*pi of the tan family, as 1-D maps in t = Im z.

    Ids: 'r_k' (Re z = pi/2 + k pi) and 'l_k' (Re z = k pi); 's_k' is the name used
    for the pole lines of z + i + tan z.
    """
    table = _line_table(m.kind)
    try:
        prefix, k = line_id.split("_")
        k = int(k)
        offset, g, dg = table[prefix]
    except (ValueError, KeyError):
        raise PreconditionError(f"{line_id!r} is not an invariant line of {m.spec}") from None
    return InvariantLine1D(line_id, complex(offset + k * math.pi), 1j, g, dg)


def fixed_point_candidates(m: MeromorphicMap, rect) -> list:
    """Attracting fixed points (|f'| < 1) in rect."""
    return [(c, mu) for c, mu in fixed_points_in_rect(m, rect) if abs(mu) < 1]


def residue_order(m: MeromorphicMap, p: complex) -> tuple:
    """(order, leading coefficient r) with f(p + u) ~ r / u**order near the pole p."""
    e1, e2 = 1e-6, 1e-7
    d = complex(math.cos(0.7), math.sin(0.7))
    f1 = complex(_raw(m, np.array([p + e1 * d]))[0][0])
    f2 = complex(_raw(m, np.array([p + e2 * d]))[0][0])
    order = max(1, round(math.log(abs(f2) / abs(f1)) / math.log(e1 / e2)))
    r = f2 * (e2 * d) ** order
    return order, r
