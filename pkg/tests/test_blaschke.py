import cmath
import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from fatou_access.blaschke import (
    BlaschkeProduct,
    BoundaryClass,
    EllipticMobiusError,
    InnerKind,
    aberth,
    all_fixed_points,
    angular_derivative,
    boundary_fixed_points,
    denjoy_wolff_and_classify,
    deviation_bound,
    radial_hyperbolic_deviation,
    random_product,
    wolff_horodisc_check,
)
from fatou_access.core import PreconditionError, is_inf

SQ3 = math.sqrt(3)
Z2 = BlaschkeProduct(0, (0, 0))
HYP = BlaschkeProduct(0, (1j / SQ3 * cmath.sqrt(1.5), -1j / SQ3 * cmath.sqrt(1.5)))  # (z^2 + 1/2)/(1 + z^2/2)
DPAR = BlaschkeProduct(0, (1j / SQ3, -1j / SQ3))  # (3z^2 + 1)/(3 + z^2)
SPAR = BlaschkeProduct(math.pi / 3, (1j / SQ3, -1 / 3))


def test_named_products_match_rational_forms():
    z = np.exp(1j * np.linspace(0, 6, 40)) * 0.7
    assert np.allclose(HYP(z), (z**2 + 0.5) / (1 + z**2 / 2))
    assert np.allclose(DPAR(z), (3 * z**2 + 1) / (3 + z**2))
    assert np.allclose(Z2(z), z**2)


def _sympy_fixed_roots(theta_exact, zeros_exact):
    z = sympy.symbols("z")
    P, Q = sympy.Integer(1), sympy.Integer(1)
    for a in zeros_exact:
        P *= z - a
        Q *= 1 - sympy.conjugate(a) * z
    poly = sympy.Poly(sympy.expand(theta_exact * P - z * Q), z)
    return {complex(sympy.N(r, 30)): m for r, m in sympy.roots(poly).items()}, poly.degree()


def _records(B):
    return [(r.location, r.multiplicity) for r in all_fixed_points(B)]


def _match(recs, oracle, total_degree):
    finite = [(loc, m) for loc, m in recs if not is_inf(loc)]
    at_inf = sum(m for loc, m in recs if is_inf(loc))
    assert at_inf == total_degree - sum(oracle.values())
    assert len(finite) == len(oracle)
    for r, m in oracle.items():
        hits = [mm for loc, mm in finite if abs(loc - r) <= 1e-6]
        assert hits == [m]


def test_z_squared_fixed_points_oracle():
    oracle, _ = _sympy_fixed_roots(1, [0, 0])
    _match(_records(Z2), oracle, 3)
    recs = all_fixed_points(Z2)
    zero = [r for r in recs if r.location == 0][0]
    one = [r for r in recs if abs(r.location - 1) < 1e-12][0]
    assert abs(zero.multiplier) < 1e-12 and zero.boundary_class is BoundaryClass.NOT_BOUNDARY
    assert one.multiplier == pytest.approx(2) and one.boundary_class is BoundaryClass.REPELLING


def test_hyperbolic_fixed_points_oracle():
    s = sympy.sqrt(sympy.Rational(1, 2))
    oracle, _ = _sympy_fixed_roots(1, [sympy.I * s, -sympy.I * s])
    _match(_records(HYP), oracle, 3)
    locs = sorted((r.location for r in all_fixed_points(HYP)), key=lambda c: c.imag)
    want = [cmath.exp(-1j * math.pi / 3), 1, cmath.exp(1j * math.pi / 3)]
    assert np.allclose(locs, want, atol=1e-10)


def test_doubly_parabolic_triple_root_oracle():
    s = 1 / sympy.sqrt(3)
    oracle, _ = _sympy_fixed_roots(1, [sympy.I * s, -sympy.I * s])
    assert oracle == {1.0: 3}
    (rec,) = all_fixed_points(DPAR)
    assert rec.multiplicity == 3 and abs(rec.location - 1) <= 1e-6
    assert rec.boundary_class is BoundaryClass.PARABOLIC


def test_simply_parabolic_example_is_a_double_root():
    # zeros i/sqrt3 and -1/3 lie on the horocycle |z - 1/3| = 2/3 at 1; with theta = pi/3 the
    # fixed-point cubic has a double root at 1 (checked exactly) and a third root off the circle
    rot = sympy.Rational(1, 2) + sympy.I * sympy.sqrt(3) / 2
    oracle, _ = _sympy_fixed_roots(rot, [sympy.I / sympy.sqrt(3), -sympy.Rational(1, 3)])
    assert oracle[1.0] == 2
    cls = denjoy_wolff_and_classify(SPAR)
    assert cls.value is InnerKind.SIMPLY_PARABOLIC
    assert abs(cls.denjoy_wolff - 1) < 1e-6
    assert cls.D == 2


def test_rotation_fixes_zero_and_infinity():
    B = BlaschkeProduct(math.pi / 3, (0,))
    recs = all_fixed_points(B)
    assert len(recs) == 2 and recs[0].location == 0 and is_inf(recs[1].location)
    with pytest.raises(EllipticMobiusError):
        denjoy_wolff_and_classify(B)


def test_identity_rejected():
    with pytest.raises(PreconditionError):
        all_fixed_points(BlaschkeProduct(0, (0,)))


def test_boundary_counts():
    assert boundary_fixed_points(Z2)[0] == 1
    assert boundary_fixed_points(HYP)[0] == 3
    D, (rec,) = boundary_fixed_points(DPAR)
    assert D == 1 and rec.multiplier == pytest.approx(1, abs=1e-8) and rec.multiplicity == 3


def test_angular_derivatives():
    assert angular_derivative(Z2, 1) == pytest.approx(2, abs=1e-12)
    assert angular_derivative(HYP, 1) == pytest.approx(2 / 3, abs=1e-12)
    assert angular_derivative(DPAR, 1) == pytest.approx(1, abs=1e-12)
    with pytest.raises(PreconditionError):
        angular_derivative(Z2, -1)


def test_named_classifications():
    c = denjoy_wolff_and_classify(Z2)
    assert (c.value, c.denjoy_wolff, c.D) == (InnerKind.ELLIPTIC, 0, 1)
    c = denjoy_wolff_and_classify(HYP)
    assert c.value is InnerKind.HYPERBOLIC and c.D == 3
    assert abs(c.denjoy_wolff - 1) < 1e-12 and abs(c.multiplier - 2 / 3) <= 1e-9
    c = denjoy_wolff_and_classify(DPAR)
    assert c.value is InnerKind.DOUBLY_PARABOLIC and c.D == 1 and abs(c.denjoy_wolff - 1) <= 1e-6


def test_radial_deviation_examples():
    v = radial_hyperbolic_deviation(Z2, 1, 1 - 1e-6)
    assert math.isfinite(v) and v <= deviation_bound(2) + 1e-3 and deviation_bound(2) == 4
    v = radial_hyperbolic_deviation(HYP, cmath.exp(1j * math.pi / 3), 1 - 1e-6)
    assert math.isfinite(v)
    with pytest.raises(PreconditionError):
        radial_hyperbolic_deviation(Z2, -1, 0.9)
    with pytest.raises(PreconditionError):
        radial_hyperbolic_deviation(Z2, 1, 1.0)


@pytest.mark.parametrize("B,r", [(HYP, 0.25), (HYP, 0.5), (DPAR, 0.25), (SPAR, 0.3)])
def test_wolff_horodiscs(B, r):
    assert wolff_horodisc_check(B, r)


def test_horodisc_rejects_interior_dw():
    with pytest.raises(PreconditionError):
        wolff_horodisc_check(Z2, 0.25)


def test_parse():
    B = BlaschkeProduct.parse("blaschke:theta=0.5;zeros=0.3+0.1i,-0.2i")
    assert B.theta == 0.5 and B.zeros == (0.3 + 0.1j, -0.2j)
    with pytest.raises(PreconditionError):
        BlaschkeProduct.parse("theta=0")
    with pytest.raises(PreconditionError):
        BlaschkeProduct.parse("theta=0;zeros=1.5")


def test_aberth_agrees_with_numpy_roots():
    rng = np.random.default_rng(4)
    for _ in range(50):
        c = rng.normal(size=7) + 1j * rng.normal(size=7)
        got = np.sort_complex(aberth(c, np.roots(c) * (1 + 1e-3)))
        want = np.sort_complex(np.roots(c))
        assert np.allclose(got, want, atol=1e-8)


products = st.builds(
    lambda seed, d: random_product(np.random.default_rng(seed), d),
    st.integers(0, 2**32 - 1), st.integers(2, 6),
)


@settings(max_examples=150, deadline=None)
@given(products)
def test_random_products_fixed_point_bounds(B):
    recs = all_fixed_points(B)
    assert sum(r.multiplicity for r in recs) == B.d + 1
    D = sum(1 for r in recs if r.on_boundary)
    assert B.d - 1 <= D <= B.d + 1
    assert sum(1 for r in recs if r.on_boundary and r.boundary_class is not BoundaryClass.REPELLING) <= 1
    c = denjoy_wolff_and_classify(B, validate=False)
    if c.value is InnerKind.ELLIPTIC:
        assert D == B.d - 1
        # the attracting point and its reflection in the circle
        p = c.denjoy_wolff
        locs = [r.location for r in recs]
        if abs(p) < 1e-12:
            assert any(is_inf(l) for l in locs)
        else:
            assert any(not is_inf(l) and abs(l - 1 / p.conjugate()) < 1e-6 * abs(1 / p) for l in locs)
    elif c.value is InnerKind.HYPERBOLIC:
        assert D == B.d + 1


@settings(max_examples=100, deadline=None)
@given(products)
def test_unimodular_on_circle_and_self_map(B):
    zeta = np.exp(1j * np.linspace(0, 2 * np.pi, 100, endpoint=False))
    assert np.max(np.abs(np.abs(B(zeta)) - 1)) <= 1e-10
    rng = np.random.default_rng(0)
    z = 0.999 * np.sqrt(rng.random(200)) * np.exp(2j * np.pi * rng.random(200))
    assert np.all(np.abs(B(z)) < 1)


@settings(max_examples=100, deadline=None)
@given(products)
def test_conjugation_symmetry(B):
    Bc = BlaschkeProduct(-B.theta, tuple(a.conjugate() for a in B.zeros))
    a = [r.location for r in all_fixed_points(B) if not is_inf(r.location)]
    b = [r.location for r in all_fixed_points(Bc) if not is_inf(r.location)]
    assert len(a) == len(b)
    for p in a:
        assert min(abs(p.conjugate() - q) for q in b) <= 1e-8


@settings(max_examples=60, deadline=None)
@given(products)
def test_derivative_matches_difference(B):
    z = np.array([0.1 + 0.2j, -0.5j, 0.7, -0.3 + 0.3j])
    h = 1e-6
    fd = (B(z + h) - B(z - h)) / (2 * h)
    assert np.allclose(B.derivative(z), fd, rtol=1e-5, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(products)
def test_iteration_oracle_non_parabolic(B):
    c = denjoy_wolff_and_classify(B, validate=False)
    if c.value in (InnerKind.SIMPLY_PARABOLIC, InnerKind.DOUBLY_PARABOLIC):
        return
    z = 0j
    for _ in range(10_000):
        z = B.scalar(z)
        if abs(z - c.denjoy_wolff) < 1e-4:
            break
    assert abs(z - c.denjoy_wolff) < 1e-4


@settings(max_examples=60, deadline=None)
@given(products)
def test_radial_deviation_bound(B):
    D, recs = boundary_fixed_points(B)
    for r in recs:
        if r.multiplicity != 1:
            continue
        a = angular_derivative(B, r.location)
        assert radial_hyperbolic_deviation(B, r.location, 1 - 1e-6) <= deviation_bound(a) + 1e-3
