"""Finite Blaschke products: fixed points with multiplicity, boundary fixed points,
angular derivatives, the Denjoy-Wolff point and the inner-function classification."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    INF,
    InternalInconsistency,
    PreconditionError,
    disc_hyperbolic_distance_array,
    parse_complex,
)

BOUNDARY_TOL = 1e-8
PARABOLIC_TOL = 1e-8
CLUSTER_TOL = 1e-5
PARABOLIC_LINK = 1e-3
ROOT_RESIDUAL = 1e-12


class EllipticMobiusError(PreconditionError):
    """Elliptic disc automorphisms have no Denjoy-Wolff point."""


@dataclass(frozen=True)
class BlaschkeProduct:
    theta: float
    zeros: tuple

    def __post_init__(self):
        zs = tuple(complex(a) for a in self.zeros)
        if not zs:
            raise PreconditionError("a Blaschke product needs at least one zero")
        for a in zs:
            if not abs(a) < 1:
                raise PreconditionError(f"zero {a} is not inside the unit disc")
        object.__setattr__(self, "zeros", zs)
        object.__setattr__(self, "theta", float(self.theta) % (2 * math.pi))

    @property
    def d(self) -> int:
        return len(self.zeros)

    @property
    def rotation(self) -> complex:
        return cmath.exp(1j * self.theta)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, self.rotation, dtype=complex)
        with np.errstate(all="ignore"):
            for a in self.zeros:
                out = out * (z - a) / (1 - a.conjugate() * z)
        return out

    def derivative(self, z):
        # product rule, so that the value stays finite at the zeros of B
        z = np.asarray(z, dtype=complex)
        facs = [(z - a) / (1 - a.conjugate() * z) for a in self.zeros]
        out = np.zeros(z.shape, dtype=complex)
        with np.errstate(all="ignore"):
            for k, a in enumerate(self.zeros):
                term = (1 - abs(a) ** 2) / (1 - a.conjugate() * z) ** 2
                for j, f in enumerate(facs):
                    if j != k:
                        term = term * f
                out = out + term
        return self.rotation * out

    def scalar(self, z: complex) -> complex:
        out = self.rotation
        for a in self.zeros:
            out *= (z - a) / (1 - a.conjugate() * z)
        return out

    def fixed_point_polynomial(self) -> np.ndarray:
        """Coefficients (descending) of e^{i theta} prod(z - a) - z prod(1 - conj(a) z)."""
        P = np.poly(np.asarray(self.zeros))
        Q = np.array([1.0 + 0j])
        for a in self.zeros:
            Q = np.convolve(Q, np.array([-a.conjugate(), 1.0]))
        return self.rotation * np.concatenate([[0.0], P]) - np.concatenate([Q, [0.0]])

    @classmethod
    def parse(cls, text: str) -> "BlaschkeProduct":
        """Parse 'theta=0;zeros=0.3+0.1i,-0.2i' (an optional 'blaschke:' prefix is accepted)."""
        s = text.strip()
        if s.startswith("blaschke:"):
            s = s[len("blaschke:"):]
        fields = {}
        for part in filter(None, s.split(";")):
            if "=" not in part:
                raise PreconditionError(f"field {part!r} lacks '='")
            k, v = part.split("=", 1)
            fields[k.strip()] = v.strip()
        if "zeros" not in fields:
            raise PreconditionError("Blaschke spec needs a zeros= field")
        try:
            theta = float(fields.get("theta", "0"))
        except ValueError:
            raise PreconditionError(f"bad theta {fields['theta']!r}") from None
        zeros = tuple(parse_complex(z) for z in fields["zeros"].split(","))
        return cls(theta, zeros)


class BoundaryClass(Enum):
    ATTRACTING = "attracting"
    PARABOLIC = "parabolic"
    REPELLING = "repelling"
    NOT_BOUNDARY = "not_boundary"


@dataclass(frozen=True)
class FixedPointRecord:
    location: complex
    multiplicity: int
    multiplier: complex
    on_boundary: bool
    boundary_class: BoundaryClass


class InnerKind(Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    SIMPLY_PARABOLIC = "simply_parabolic"
    DOUBLY_PARABOLIC = "doubly_parabolic"


@dataclass(frozen=True)
class InnerClass:
    value: InnerKind
    denjoy_wolff: complex
    D: int
    multiplier: complex


# ---------------------------------------------------------------- polynomial roots

def aberth(coeffs, z0, tol: float = ROOT_RESIDUAL, maxiter: int = 80) -> np.ndarray:
    """Aberth-Ehrlich simultaneous refinement of all roots starting from z0."""
    c = np.asarray(coeffs, dtype=complex)
    dc = np.polyder(c)
    absc = np.abs(c)
    z = np.array(z0, dtype=complex)
    n = len(z)
    done = np.zeros(n, dtype=bool)
    for _ in range(maxiter):
        pz = np.polyval(c, z)
        scale = np.polyval(absc, np.abs(z))
        done |= np.abs(pz) <= tol * scale
        if done.all():
            break
        with np.errstate(all="ignore"):
            newton = pz / np.polyval(dc, z)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            w = newton / (1.0 - newton * inv.sum(axis=1))
        ok = np.isfinite(w) & ~done
        if not ok.any():
            break
        z = np.where(ok, z - w, z)
    return z


def poly_roots(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=complex)
    if len(c) < 2:
        return np.zeros(0, dtype=complex)
    z0 = np.roots(c)
    # separate exact coincidences so the Aberth correction stays finite
    for i in range(len(z0)):
        for j in range(i):
            if z0[i] == z0[j]:
                z0[i] += 1e-12 * (i + 1)
    return aberth(c, z0)


def _cluster(roots: np.ndarray, tol: float, linked=None) -> list:
    n = len(roots)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i):
            if abs(roots[i] - roots[j]) <= tol or (linked is not None and linked(i, j)):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [sorted(g) for g in groups.values()]


def _vanishes_to_order(coeffs: np.ndarray, c: complex, m: int, rel: float = 1e-10) -> bool:
    """p(c) = ... = p^{(m-1)}(c) = 0 up to rounding (Taylor coefficients relative to scale)."""
    p = np.asarray(coeffs, dtype=complex)
    absp = np.abs(p)
    for j in range(m):
        tj = np.polyval(p, c) / math.factorial(j)
        sj = np.polyval(absp, abs(c)) / math.factorial(j) + 1e-300
        if abs(tj) > rel * sj:
            return False
        p = np.polyder(p)
        absp = np.polyder(absp)
    return True


def clustered_roots(coeffs, linked=None) -> list:
    """[(root, multiplicity)] of a polynomial, finite roots only.

    Roots within CLUSTER_TOL are grouped, as are pairs accepted by `linked(i, j, roots)`;
    a group counts as one multiple root only if the polynomial vanishes to that order
    at its centroid.
    """
    c = np.asarray(coeffs, dtype=complex)
    roots = poly_roots(c)
    link = None if linked is None else (lambda i, j: linked(i, j, roots))
    out = []
    for g in _cluster(roots, CLUSTER_TOL, link):
        centre = complex(np.mean(roots[g]))
        if len(g) > 1 and not _vanishes_to_order(c, centre, len(g)):
            out.extend((complex(roots[i]), 1) for i in g)
        else:
            out.append((centre, len(g)))
    return out


# ---------------------------------------------------------------- fixed points

def _classify_boundary(mult: complex) -> BoundaryClass:
    lam = mult.real
    if abs(mult - 1) <= PARABOLIC_TOL:
        return BoundaryClass.PARABOLIC
    if lam < 1:
        return BoundaryClass.ATTRACTING
    return BoundaryClass.REPELLING


def _is_identity(B: BlaschkeProduct) -> bool:
    return B.d == 1 and B.zeros[0] == 0 and abs(B.rotation - 1) < 1e-15


def all_fixed_points(B: BlaschkeProduct) -> list:
    """Solutions of B(z) = z on the sphere, with multiplicity (sum = d + 1)."""
    if _is_identity(B):
        raise PreconditionError("B is the identity; every point is fixed")
    p = B.fixed_point_polynomial()
    lead_tol = 1e-14 * float(np.max(np.abs(p)))
    k = 0
    while k < len(p) and abs(p[k]) <= lead_tol:
        k += 1
    p = p[k:]
    inf_mult = k

    # A root of multiplicity m splits by about eps^(1/m) once the coefficients are rounded,
    # which for m = 3 already exceeds CLUSTER_TOL. Nearby roots that are all parabolic
    # within PARABOLIC_TOL are therefore linked as well.
    def parabolic_pair(i, j, roots):
        zi, zj = roots[i], roots[j]
        if abs(zi - zj) > PARABOLIC_LINK or max(abs(zi), abs(zj)) > 1e6:
            return False
        mu = B.derivative(np.array([zi, zj]))
        return bool(np.all(np.abs(mu - 1) <= PARABOLIC_TOL))

    records = []
    for z, m in clustered_roots(p, parabolic_pair):
        if abs(z) > 1e12:
            inf_mult += m
            continue
        mult = complex(B.derivative(np.array([z]))[0])
        on_b = abs(abs(z) - 1) <= BOUNDARY_TOL
        if m == 1 and abs(B.scalar(z) - z) > 1e-8 * max(1.0, abs(z)):
            raise InternalInconsistency(f"fixed point residual too large at {z}")
        if on_b:
            z = z / abs(z)
            mult = complex(mult.real, mult.imag)
            cls = _classify_boundary(mult)
        else:
            cls = BoundaryClass.NOT_BOUNDARY
        records.append(FixedPointRecord(z, m, mult, on_b, cls))
    if inf_mult:
        # reflection symmetry B(1/conj z) = 1/conj B(z) makes the multiplier at infinity conj B'(0)
        mult = complex(B.derivative(np.array([0j]))[0]).conjugate()
        records.append(FixedPointRecord(INF, inf_mult, mult, False, BoundaryClass.NOT_BOUNDARY))
    total = sum(r.multiplicity for r in records)
    if total != B.d + 1:
        raise InternalInconsistency(f"fixed-point multiplicities sum to {total}, expected {B.d + 1}")
    return sorted(records, key=lambda r: (math.isinf(r.location.real), r.location.real, r.location.imag))


def boundary_fixed_points(B: BlaschkeProduct) -> tuple:
    recs = [r for r in all_fixed_points(B) if r.on_boundary]
    return len(recs), recs


def _check_boundary_fixed(B: BlaschkeProduct, zeta) -> complex:
    zeta = complex(zeta)
    if abs(abs(zeta) - 1) > 1e-12 * 1e4:
        raise PreconditionError(f"{zeta} is not on the unit circle")
    if abs(B.scalar(zeta) - zeta) > 1e-8:
        raise PreconditionError(f"{zeta} is not a fixed point of B")
    return zeta


def angular_derivative(B: BlaschkeProduct, zeta) -> float:
    """B'(zeta) at a boundary fixed point; a positive real by Julia-Wolff."""
    zeta = _check_boundary_fixed(B, zeta)
    a = complex(B.derivative(np.array([zeta]))[0])
    if abs(a.imag) > 1e-8 * max(1.0, abs(a)) or a.real <= 0:
        raise InternalInconsistency(f"angular derivative {a} is not a positive real")
    return a.real


# ---------------------------------------------------------------- Denjoy-Wolff

def _iterate_to(B: BlaschkeProduct, target: complex, steps: int, tol: float) -> bool:
    rot, zeros = B.rotation, [(a, a.conjugate()) for a in B.zeros]
    z = 0j
    for _ in range(steps):
        if abs(z - target) < tol:
            return True
        w = rot
        for a, ac in zeros:
            w *= (z - a) / (1 - ac * z)
        z = w
    return abs(z - target) < tol


def denjoy_wolff_and_classify(B: BlaschkeProduct, validate: bool = True) -> InnerClass:
    recs = all_fixed_points(B)
    D = sum(1 for r in recs if r.on_boundary)
    interior = [r for r in recs if not math.isinf(r.location.real)
                and abs(r.location) < 1 - BOUNDARY_TOL]
    if B.d == 1 and interior:
        raise EllipticMobiusError("elliptic Mobius map: no Denjoy-Wolff point")
    attract = [r for r in interior if abs(r.multiplier) < 1]
    bdw = [r for r in recs if r.on_boundary and r.boundary_class is not BoundaryClass.REPELLING]
    if len(attract) + len(bdw) != 1:
        raise InternalInconsistency(
            f"expected one Denjoy-Wolff candidate, found {len(attract)} interior and {len(bdw)} boundary")
    if attract:
        r, kind = attract[0], InnerKind.ELLIPTIC
    else:
        r = bdw[0]
        if r.boundary_class is BoundaryClass.ATTRACTING:
            kind = InnerKind.HYPERBOLIC
        elif r.multiplicity == 2:
            kind = InnerKind.SIMPLY_PARABOLIC
        elif r.multiplicity == 3:
            kind = InnerKind.DOUBLY_PARABOLIC
        else:
            raise InternalInconsistency(f"parabolic point with multiplicity {r.multiplicity}")
    if validate:
        parabolic = kind in (InnerKind.SIMPLY_PARABOLIC, InnerKind.DOUBLY_PARABOLIC)
        steps, tol = (10**6, 1e-2) if parabolic else (10**4, 1e-4)
        if not _iterate_to(B, r.location, steps, tol):
            raise InternalInconsistency(
                f"orbit of 0 does not approach the Denjoy-Wolff point {r.location} within {tol}")
    return InnerClass(kind, r.location, D, r.multiplier)


def radial_hyperbolic_deviation(B: BlaschkeProduct, zeta, t_max: float) -> float:
    """sup over a 1000-point grid of t in [0, t_max] of rho(B(t zeta), t zeta)."""
    zeta = _check_boundary_fixed(B, zeta)
    zeta = zeta / abs(zeta)
    if not t_max < 1:
        raise PreconditionError("t_max must be below 1")
    z = np.linspace(0.0, t_max, 1000) * zeta
    w = B(z)
    if np.any(np.abs(w) >= 1):
        raise InternalInconsistency("B(t zeta) left the unit disc")
    return float(np.max(disc_hyperbolic_distance_array(w, z)))


def deviation_bound(a: float) -> float:
    """(3|a-1| + 1) / min(a, 1), the constant of the radial deviation estimate."""
    return (3 * abs(a - 1) + 1) / min(a, 1)


def wolff_horodisc_check(B: BlaschkeProduct, r: float, samples: int = 1000, seed: int = 0) -> bool:
    """True iff B maps the disc of diameter [(1-2r) zeta, zeta] into itself on random samples."""
    if not 0 < r < 1:
        raise PreconditionError("horodisc radius must be in (0, 1)")
    cls = denjoy_wolff_and_classify(B, validate=False)
    if cls.value is InnerKind.ELLIPTIC:
        raise PreconditionError("Denjoy-Wolff point is interior; the horodisc is undefined")
    zeta = cls.denjoy_wolff
    centre = (1 - r) * zeta
    rng = np.random.default_rng(seed)
    rad = r * np.sqrt(rng.random(samples)) * (1 - 1e-9)
    ang = 2 * np.pi * rng.random(samples)
    z = centre + rad * np.exp(1j * ang)
    return bool(np.all(np.abs(B(z) - centre) < r))


def random_product(rng: np.random.Generator, d: int, max_modulus: float = 0.95) -> BlaschkeProduct:
    """Zeros uniform (by area) in |a| < max_modulus, angle theta uniform."""
    rad = max_modulus * np.sqrt(rng.random(d))
    ang = 2 * np.pi * rng.random(d)
    return BlaschkeProduct(2 * np.pi * rng.random(), tuple(rad * np.exp(1j * ang)))
