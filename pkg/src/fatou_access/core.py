"""Riemann-sphere arithmetic and the hyperbolic metric of the unit disc."""

from __future__ import annotations

import math

import numpy as np

INF = complex(math.inf, 0.0)
OVERFLOW = 1e12
BOUNDARY_TOL = 1e-12


class PreconditionError(ValueError):
    """Input violates a documented precondition (CLI exit code 2)."""


class InternalInconsistency(RuntimeError):
    """Two independent computations disagree (CLI exit code 3)."""


class EvaluationError(ArithmeticError):
    """A map evaluation produced NaN."""


def is_inf(z) -> bool:
    z = complex(z)
    return math.isinf(z.real) or math.isinf(z.imag)


def to_sphere(z) -> complex:
    """Normalize a number to a SpherePoint: finite complex or the canonical INF."""
    z = complex(z)
    if math.isnan(z.real) or math.isnan(z.imag):
        raise EvaluationError("NaN is not a point of the sphere")
    if math.isinf(z.real) or math.isinf(z.imag) or abs(z) > OVERFLOW:
        return INF
    return z


def normalize_array(z: np.ndarray) -> np.ndarray:
    """Vector form of to_sphere; NaN entries are left in place for the caller to flag."""
    z = np.asarray(z, dtype=complex)
    with np.errstate(invalid="ignore", over="ignore"):
        big = np.isinf(z) | (np.abs(z) > OVERFLOW)
    if big.any():
        z = z.copy()
        z[big & ~np.isnan(z)] = INF
    return z


def sphere_distance(a, b) -> float:
    """Chordal distance on the Riemann sphere, with values in [0, 2]."""
    a, b = to_sphere(a), to_sphere(b)
    ia, ib = is_inf(a), is_inf(b)
    if ia and ib:
        return 0.0
    if ia or ib:
        w = b if ia else a
        return 2.0 / math.sqrt(1.0 + abs(w) ** 2)
    d = 2.0 * abs(a - b) / math.sqrt((1.0 + abs(a) ** 2) * (1.0 + abs(b) ** 2))
    return min(d, 2.0)


def chordal_array(a: np.ndarray, b) -> np.ndarray:
    """Chordal distance for arrays of finite points (INF entries handled as above)."""
    a = np.asarray(a, dtype=complex)
    b = np.broadcast_to(np.asarray(b, dtype=complex), a.shape)
    ia, ib = np.isinf(a), np.isinf(b)
    with np.errstate(invalid="ignore", over="ignore"):
        d = 2.0 * np.abs(a - b) / np.sqrt((1.0 + np.abs(a) ** 2) * (1.0 + np.abs(b) ** 2))
        one = np.where(ia, 2.0 / np.sqrt(1.0 + np.abs(b) ** 2), 2.0 / np.sqrt(1.0 + np.abs(a) ** 2))
    d = np.where(ia ^ ib, one, d)
    d = np.where(ia & ib, 0.0, d)
    return np.minimum(d, 2.0)


def _interior(z) -> complex:
    z = complex(z)
    if math.isnan(z.real) or math.isnan(z.imag) or not abs(z) < 1.0:
        raise PreconditionError(f"{z} is not an interior point of the unit disc")
    return z


def disc_hyperbolic_distance(z, w) -> float:
    """Distance in the Poincare disc with density 2/(1-|z|^2), so d(0, 1/2) = ln 3.

    Uses 2 asinh(|z-w| / sqrt((1-|z|^2)(1-|w|^2))), which keeps full relative
    accuracy near the diagonal and near the boundary.
    """
    z, w = _interior(z), _interior(w)
    denom = math.sqrt((1.0 - abs(z) ** 2) * (1.0 - abs(w) ** 2))
    return 2.0 * math.asinh(abs(z - w) / denom)


def disc_hyperbolic_distance_array(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(np.abs(z) >= 1.0) or np.any(np.abs(w) >= 1.0):
        raise PreconditionError("hyperbolic distance needs interior points")
    denom = np.sqrt((1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2))
    return 2.0 * np.arcsinh(np.abs(z - w) / denom)


def on_unit_circle(z, tol: float = BOUNDARY_TOL) -> bool:
    return abs(abs(complex(z)) - 1.0) <= tol


def disc_automorphism(a: complex, theta: float):
    """z -> e^{i theta} (z - a) / (1 - conj(a) z), an automorphism of the disc."""
    a = _interior(a)
    rot = complex(math.cos(theta), math.sin(theta))

    def m(z):
        return rot * (z - a) / (1 - a.conjugate() * z)

    return m


def parse_complex(text: str) -> complex:
    """Parse '0.3+0.1i', '-0.2i', 'i', '2' and the like."""
    s = text.strip().replace(" ", "").replace("I", "i").replace("j", "i")
    if not s:
        raise PreconditionError("empty complex number")
    if s.endswith("i"):
        body = s[:-1]
        if body in ("", "+", "-") or body[-1] in "+-":
            s = body + "1i"
    try:
        return complex(s.replace("i", "j"))
    except ValueError:
        raise PreconditionError(f"cannot parse complex number {text!r}") from None
