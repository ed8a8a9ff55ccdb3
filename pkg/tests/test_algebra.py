"""Polynomials and rational coefficients, checked against sympy."""
import sympy
from hypothesis import given
from hypothesis import strategies as st

from conftest import PROP
from formlet.algebra import (
    ONE,
    ExpansionSetting,
    Polynomial,
    RationalCoefficient,
    format_poly,
    poly_add,
    poly_gcd,
    poly_mul,
    rat,
    rat_add,
    rat_expand,
    rat_mul,
    rat_neg,
)
from formlet.errors import DenominatorVanishesAtZero

NAMES = ["d", "w", "x"]
SYMS = sympy.symbols(NAMES)
D, W, X = (Polynomial.var(i) for i in range(3))


def to_sympy(p):
    return sum(
        (c * sympy.Mul(*[SYMS[v] ** e for v, e in m]) for m, c in p.terms),
        sympy.Integer(0),
    )


def spoly(p):
    return sympy.Poly(to_sympy(p), *SYMS)


def f(n, d=1):
    return RationalCoefficient(n, d)


monos = st.lists(st.tuples(st.integers(0, 2), st.integers(1, 2)), max_size=2, unique_by=lambda t: t[0]).map(
    lambda l: tuple(sorted(l))
)
polys = st.dictionaries(monos, st.integers(-3, 3), max_size=4).map(Polynomial)
nonzero = polys.filter(lambda p: not p.is_zero())
rats = st.builds(RationalCoefficient, polys, nonzero)


# -- examples


def test_add_cancellation():
    assert poly_add(D + X, -X) == D
    assert poly_add(Polynomial(), D) == D


def test_add_offsets():
    # frozen: termwise expansion of (d+2w-6) + (-2)
    assert poly_add(D + 2 * W - 6, Polynomial.const(-2)) == D + 2 * W - 8


def test_mul_examples():
    assert poly_mul(1 - X, 1 + X) == 1 - X * X
    assert poly_mul(D, Polynomial()).is_zero()
    assert poly_mul(W - 3, W - 4) == W * W - 7 * W + 12
    assert format_poly(W * W - 7 * W + 12, NAMES) == "w^2-7*w+12"


def test_gcd_examples():
    # frozen: 2d^2-6d+4 = 2(d-1)(d-2) by trial division
    assert poly_gcd(2 * D * D - 6 * D + 4, D - 1) == D - 1
    assert poly_gcd(D + W, D + W) == D + W
    assert poly_gcd(-D - W, -D - W) == D + W
    assert poly_gcd(Polynomial.const(6), Polynomial.const(4)) == Polynomial.const(2)


def test_rat_mul_examples():
    a, b, x, y = (Polynomial.var(i) for i in range(4))
    assert rat_mul(f(x, y), f(a, b)) == f(a * x, b * y)
    assert rat_mul(rat(3), rat(1, 3)) == rat(1)
    # frozen: (d-1)/(d^2-1) cancels to 1/(d+1)
    assert rat_mul(f(D - 1), f(ONE, D * D - 1)) == f(ONE, D + 1)
    r = rat_mul(f(D - 1), f(ONE, D * D - 1))
    assert r.num == ONE and r.den == D + 1


def test_rat_add_examples():
    assert rat_add(rat(1, 2), rat(1, 2)) == rat(1)
    assert rat_add(f(D + W, D), f(-D - W, D)).is_zero()
    # frozen: common denominator of 1/(w-3) + 1/(w-4)
    r = rat_add(f(ONE, W - 3), f(ONE, W - 4))
    assert r.num == 2 * W - 7 and r.den == W * W - 7 * W + 12


def test_expand_examples():
    s = ExpansionSetting(2, 3)
    r = rat_expand(f(ONE, 1 - X), s)
    assert r.num == 1 + X + X**2 + X**3 and r.den == ONE
    p = 1 + 2 * X + D * X * X
    assert rat_expand(f(p), ExpansionSetting(2, 5)) == f(p)
    # frozen: long division of 1 by 1-2x+x^2
    r = rat_expand(f(ONE, (1 - X) ** 2), ExpansionSetting(2, 2))
    assert r == f(1 + 2 * X + 3 * X * X)


def test_expand_pole_is_error():
    import pytest

    with pytest.raises(DenominatorVanishesAtZero):
        rat_expand(f(ONE, X), ExpansionSetting(2, 2))


def test_spaced_format():
    assert format_poly(-D * W + 2 * D + W + 2, NAMES, spaced=True) == " - d*w + 2*d + w + 2"
    assert format_poly(1 + X + X * X, NAMES, ascending=True) == "1+x+x^2"


# -- properties


@PROP
@given(polys, polys)
def test_gcd_matches_sympy(a, b):
    if a.is_zero() and b.is_zero():
        return
    g = poly_gcd(a, b)
    ref = spoly(a).gcd(spoly(b))
    assert spoly(g) in (ref, -ref)
    if not g.is_zero():
        assert g.leading()[1] > 0


@PROP
@given(rats, rats)
def test_results_are_reduced(a, b):
    for r in (rat_mul(a, b), rat_add(a, b)):
        assert poly_gcd(r.num, r.den) == ONE or r.num.is_zero()
        assert r.den.leading()[1] > 0
        if r.num.is_zero():
            assert r.den == ONE


@PROP
@given(rats, rats)
def test_values_match_sympy(a, b):
    # cross-multiplied: p/q == r/s  <=>  p*s == r*q
    an, ad, bn, bd = spoly(a.num), spoly(a.den), spoly(b.num), spoly(b.den)
    m, s = rat_mul(a, b), rat_add(a, b)
    assert spoly(m.num) * ad * bd == an * bn * spoly(m.den)
    assert spoly(s.num) * ad * bd == (an * bd + bn * ad) * spoly(s.den)


@PROP
@given(rats, rats, rats)
def test_field_axioms(a, b, c):
    assert rat_mul(a, b) == rat_mul(b, a)
    assert rat_add(a, b) == rat_add(b, a)
    assert rat_mul(rat_mul(a, b), c) == rat_mul(a, rat_mul(b, c))
    assert rat_add(rat_add(a, b), c) == rat_add(a, rat_add(b, c))
    assert rat_mul(a, rat_add(b, c)) == rat_add(rat_mul(a, b), rat_mul(a, c))
    assert rat_mul(a, rat(1)) == a
    assert rat_add(a, rat_neg(a)).is_zero()
    assert rat_add(a, rat_neg(a)) == rat(0)


series_num = st.dictionaries(
    st.sampled_from([(), ((0, 1),), ((2, 1),), ((2, 2),), ((0, 1), (2, 1))]), st.integers(-3, 3), max_size=4
).map(Polynomial)
series_den = st.tuples(st.integers(1, 3), st.lists(st.integers(-2, 2), max_size=3)).map(
    lambda t: Polynomial({(): t[0], **{((2, k + 1),): c for k, c in enumerate(t[1]) if c}})
)


@PROP
@given(series_num, series_den, st.integers(0, 4))
def test_series_inverse(num, den, order):
    a = RationalCoefficient(num, den)
    r = rat_expand(a, ExpansionSetting(2, order))
    assert r.den.is_const()

    def trunc(p):
        return Polynomial({m: c for m, c in p.terms if dict(m).get(2, 0) <= order})

    assert trunc(r.num * a.den) == trunc(a.num * r.den)
