"""Exact arithmetic on multivariate integer polynomials and their quotients.

Symbols are identified by small integers (their declaration order).  A
monomial is a tuple of ``(symbol, exponent)`` pairs sorted by symbol, with
no zero exponents; the constant monomial is ``()``.  Coefficients are
Python ints, so there is no overflow.

Polynomials order their monomials lexicographically with the first declared
symbol most significant.  That order decides printing and the sign
normalization of denominators.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd as igcd

from sympy.polys.domains import ZZ
from sympy.polys.orderings import lex
from sympy.polys.rings import PolyRing

from .errors import DenominatorVanishesAtZero, FormletError

_SENTINEL = (1 << 62, 0)


def lex_key(mono):
    """Sort key putting monomials in descending lexicographic order."""
    return tuple((v, -e) for v, e in mono) + (_SENTINEL,)


def _mono_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for v, e in m2:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


def _mono_div(m1, m2):
    """m1 / m2 or None when m2 does not divide m1."""
    if not m2:
        return m1
    d = dict(m1)
    for v, e in m2:
        have = d.get(v, 0)
        if have < e:
            return None
        if have == e:
            del d[v]
        else:
            d[v] = have - e
    return tuple(sorted(d.items()))


# ---------------------------------------------------------------------------
# dict-level kernels (mono -> int), used internally for speed


def _add_into(acc, p, scale=1):
    for m, c in p.items():
        s = acc.get(m, 0) + scale * c
        if s:
            acc[m] = s
        else:
            acc.pop(m, None)
    return acc


def _mul(a, b):
    if not a or not b:
        return {}
    if len(a) == 1 and () in a:
        k = a[()]
        return {m: k * c for m, c in b.items()}
    if len(b) == 1 and () in b:
        k = b[()]
        return {m: k * c for m, c in a.items()}
    out = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = _mono_mul(m1, m2)
            s = out.get(m, 0) + c1 * c2
            if s:
                out[m] = s
            else:
                del out[m]
    return out


def _leading(p):
    m = min(p, key=lex_key)
    return m, p[m]


def _div_exact(a, b):
    """Exact quotient a / b, or None when b does not divide a."""
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    if len(b) == 1 and () in b:
        k = b[()]
        out = {}
        for m, c in a.items():
            q, r = divmod(c, k)
            if r:
                return None
            out[m] = q
        return out
    r = dict(a)
    q = {}
    lm_b, lc_b = _leading(b)
    while r:
        lm_r, lc_r = _leading(r)
        mq = _mono_div(lm_r, lm_b)
        if mq is None:
            return None
        cq, rem = divmod(lc_r, lc_b)
        if rem:
            return None
        q[mq] = cq
        _add_into(r, {_mono_mul(mq, m): c for m, c in b.items()}, -cq)
    return q


def _vars(p):
    s = set()
    for m in p:
        for v, _ in m:
            s.add(v)
    return s


def _univ(p, v):
    """Split p into {degree in v: coefficient dict free of v}."""
    out = {}
    for m, c in p.items():
        deg = 0
        rest = []
        for var, e in m:
            if var == v:
                deg = e
            else:
                rest.append((var, e))
        out.setdefault(deg, {})[tuple(rest)] = c
    return out


def _normalize_sign(p):
    if p and _leading(p)[1] < 0:
        return {m: -c for m, c in p.items()}
    return p


@lru_cache(maxsize=256)
def _ring(nvars):
    return PolyRing(tuple(f"x{i}" for i in range(nvars)), ZZ, lex)


def _gcd_dicts(a, b):
    """gcd via sympy's sparse integer polynomial ring."""
    if not a:
        return _normalize_sign(b)
    if not b:
        return _normalize_sign(a)
    if len(a) == 1 and len(b) == 1 and () in a and () in b:
        return {(): igcd(a[()], b[()])}
    order = sorted(_vars(a) | _vars(b))
    pos = {v: i for i, v in enumerate(order)}
    n = len(order)
    R = _ring(n)

    def to_ring(d):
        out = {}
        for m, c in d.items():
            e = [0] * n
            for v, k in m:
                e[pos[v]] = k
            out[tuple(e)] = c
        return R.from_dict(out)

    g = to_ring(a).gcd(to_ring(b))
    res = {}
    for e, c in g.items():
        res[tuple((order[i], k) for i, k in enumerate(e) if k)] = int(c)
    return _normalize_sign(res)


# ---------------------------------------------------------------------------


class Polynomial:
    """Immutable sparse polynomial with integer coefficients."""

    __slots__ = ("terms", "_hash", "_d")

    def __init__(self, d=None):
        d = {m: c for m, c in (d or {}).items() if c}
        self._d = d
        self.terms = tuple(sorted(d.items()))
        self._hash = None

    @classmethod
    def const(cls, c):
        if c == 0:
            return ZERO
        if c == 1:
            return ONE
        return cls({(): c})

    @classmethod
    def var(cls, v, e=1):
        return cls({((v, e),): 1}) if e else ONE

    def as_dict(self):
        return dict(self._d)

    # -- queries
    def is_zero(self):
        return not self._d

    def is_const(self):
        d = self._d
        return not d or (len(d) == 1 and () in d)

    def const_value(self):
        """Integer value of a constant polynomial."""
        return self._d.get((), 0)

    def variables(self):
        return _vars(self._d)

    def degree_in(self, v):
        return max((e for m in self._d for var, e in m if var == v), default=0)

    def leading(self):
        return _leading(self._d)

    def sorted_terms(self):
        """Terms in descending lexicographic order."""
        return sorted(self._d.items(), key=lambda mc: lex_key(mc[0]))

    # -- arithmetic
    def __add__(self, other):
        if isinstance(other, int):
            other = Polynomial.const(other)
        return Polynomial(_add_into(dict(self._d), other._d))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({m: -c for m, c in self._d.items()})

    def __sub__(self, other):
        if isinstance(other, int):
            other = Polynomial.const(other)
        return Polynomial(_add_into(dict(self._d), other._d, -1))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, int):
            return Polynomial({m: c * other for m, c in self._d.items()})
        return Polynomial(_mul(self._d, other._d))

    __rmul__ = __mul__

    def __pow__(self, n):
        out = ONE
        for _ in range(n):
            out = out * self
        return out

    def exact_div(self, other):
        q = _div_exact(self._d, other._d)
        if q is None:
            raise FormletError("inexact polynomial division")
        return Polynomial(q)

    # -- identity and ordering
    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.terms == other.terms
        # never equal to an int: index arguments are ints and must stay distinct
        return False

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash(self.terms)
        return h

    # Index arguments are plain ints; they sort before every polynomial.
    def __lt__(self, other):
        if isinstance(other, Polynomial):
            return self.terms < other.terms
        return False

    def __gt__(self, other):
        if isinstance(other, Polynomial):
            return self.terms > other.terms
        return True

    def __le__(self, other):
        return self == other or self < other

    def __ge__(self, other):
        return self == other or self > other

    def __repr__(self):
        return f"Polynomial({self.to_str()})"

    def to_str(self, names=None):
        return format_poly(self, names)


ZERO = Polynomial()
ONE = Polynomial({(): 1})


def _fmt_mono(mono, names):
    parts = []
    for v, e in mono:
        n = names[v] if names is not None else f"x{v}"
        parts.append(n if e == 1 else f"{n}^{e}")
    return "*".join(parts)


def format_poly(p, names=None, spaced=False, ascending=False):
    """Render a polynomial in descending lexicographic order.

    With ``spaced`` set, binary signs get surrounding blanks and a leading
    minus is written ``- `` the way FORM prints polynomial arguments.
    """
    if p.is_zero():
        return "0"
    out = []
    items = p.sorted_terms()
    if ascending:
        items = items[::-1]
    for i, (m, c) in enumerate(items):
        neg = c < 0
        a = -c if neg else c
        body = _fmt_mono(m, names)
        if not body:
            s = str(a)
        elif a == 1:
            s = body
        else:
            s = f"{a}*{body}"
        if i == 0:
            if neg:
                s = (" - " if spaced and body else "-") + s
            out.append(s)
        else:
            sep = (" - " if neg else " + ") if spaced else ("-" if neg else "+")
            out.append(sep + s)
    return "".join(out)


def poly_add(a, b):
    return a + b


def poly_mul(a, b):
    return a * b


def poly_neg(a):
    return -a


@lru_cache(maxsize=1 << 16)
def poly_gcd(a, b):
    """gcd with positive leading coefficient; gcd(a, 0) is a normalized."""
    if a.is_zero() and b.is_zero():
        raise FormletError("gcd(0, 0) is undefined")
    return Polynomial(_gcd_dicts(a._d, b._d))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionSetting:
    variable: int
    order: int
    enabled: bool = True


class RationalCoefficient:
    """Reduced quotient num/den of polynomials, den positive-leading."""

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num, den=None, _reduced=False):
        if isinstance(num, int):
            num = Polynomial.const(num)
        if den is None:
            den = ONE
        elif isinstance(den, int):
            den = Polynomial.const(den)
        if not _reduced:
            num, den = _reduce(num, den)
        self.num = num
        self.den = den
        self._hash = None

    @classmethod
    def from_fraction(cls, q):
        q = Fraction(q)
        return cls(Polynomial.const(q.numerator), Polynomial.const(q.denominator), True)

    def is_zero(self):
        return self.num.is_zero()

    def is_one(self):
        return self.num is ONE or (self.num == ONE and self.den == ONE)

    def is_number(self):
        return self.num.is_const() and self.den.is_const()

    def as_fraction(self):
        return Fraction(self.num.const_value(), self.den.const_value())

    def variables(self):
        return self.num.variables() | self.den.variables()

    def __eq__(self, other):
        if not isinstance(other, RationalCoefficient):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num, self.den))
        return self._hash

    def __repr__(self):
        return f"RationalCoefficient({self.num.to_str()}, {self.den.to_str()})"

    def __mul__(self, other):
        return rat_mul(self, other)

    def __add__(self, other):
        return rat_add(self, other)

    def __neg__(self):
        return rat_neg(self)

    def __sub__(self, other):
        return rat_add(self, rat_neg(other))


def _reduce(num, den):
    if den.is_zero():
        raise ZeroDivisionError("zero denominator")
    if num.is_zero():
        return ZERO, ONE
    if num.is_const() and den.is_const():
        n, d = num.const_value(), den.const_value()
        g = igcd(n, d)
        if d < 0:
            g = -g
        return Polynomial.const(n // g), Polynomial.const(d // g)
    g = poly_gcd(num, den)
    if g != ONE:
        num = num.exact_div(g)
        den = den.exact_div(g)
    if den.leading()[1] < 0:
        num, den = -num, -den
    return num, den


R_ZERO = RationalCoefficient(ZERO, ONE, True)
R_ONE = RationalCoefficient(ONE, ONE, True)


def rat(n, d=1):
    """Shorthand for a numeric coefficient."""
    return RationalCoefficient(Polynomial.const(n), Polynomial.const(d))


def rat_neg(a):
    return RationalCoefficient(-a.num, a.den, True)


def rat_mul(a, b):
    if a.is_zero() or b.is_zero():
        return R_ZERO
    if a.den.is_const() and b.den.is_const() and a.num.is_const() and b.num.is_const():
        n = a.num.const_value() * b.num.const_value()
        d = a.den.const_value() * b.den.const_value()
        g = igcd(n, d)
        return RationalCoefficient(Polynomial.const(n // g), Polynomial.const(d // g), True)
    return _rat_mul_cached(a, b)


@lru_cache(maxsize=1 << 16)
def _rat_mul_cached(a, b):
    # cross cancellation keeps intermediate sizes small
    g1 = poly_gcd(a.num, b.den)
    g2 = poly_gcd(b.num, a.den)
    n1, d2 = (a.num.exact_div(g1), b.den.exact_div(g1)) if g1 != ONE else (a.num, b.den)
    n2, d1 = (b.num.exact_div(g2), a.den.exact_div(g2)) if g2 != ONE else (b.num, a.den)
    num, den = n1 * n2, d1 * d2
    if den.leading()[1] < 0:
        num, den = -num, -den
    return RationalCoefficient(num, den, True)


def rat_add(a, b):
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    if a.den.is_const() and b.den.is_const() and a.num.is_const() and b.num.is_const():
        q = a.as_fraction() + b.as_fraction()
        return RationalCoefficient.from_fraction(q)
    return _rat_add_cached(a, b)


@lru_cache(maxsize=1 << 16)
def _rat_add_cached(a, b):
    if a.den == b.den:
        return RationalCoefficient(a.num + b.num, a.den)
    return RationalCoefficient(a.num * b.den + b.num * a.den, a.den * b.den)


def rat_expand(a, s):
    """Truncated power series of a in ``s.variable`` up to ``s.order``.

    The result is returned as a RationalCoefficient with a constant
    denominator, since series coefficients may be fractions.
    """
    v = s.variable
    if a.den.variables() - {v}:
        raise FormletError("expansion denominator depends on other symbols")
    num_u = _univ(a.num._d, v)
    den_u = _univ(a.den._d, v)
    d0 = den_u.get(0, {}).get((), 0)
    if not d0:
        raise DenominatorVanishesAtZero("denominator vanishes at the expansion point")
    dcoef = {k: Fraction(c.get((), 0)) for k, c in den_u.items()}
    # coefficients of the series may themselves be polynomials in other symbols
    series = []
    for k in range(s.order + 1):
        acc = {m: Fraction(c) for m, c in num_u.get(k, {}).items()}
        for j in range(1, k + 1):
            dj = dcoef.get(j)
            if dj:
                for m, c in series[k - j].items():
                    acc[m] = acc.get(m, 0) - dj * c
        series.append({m: c / d0 for m, c in acc.items() if c})
    lcm = 1
    for coef in series:
        for c in coef.values():
            lcm = lcm * c.denominator // igcd(lcm, c.denominator)
    out = {}
    for k, coef in enumerate(series):
        for m, c in coef.items():
            mm = tuple(sorted(m + ((v, k),))) if k else m
            out[mm] = int(c * lcm)
    return RationalCoefficient(Polynomial(out), Polynomial.const(lcm))


def truncate(a, s):
    """Drop numerator terms above the expansion order (den must be constant)."""
    keep = {m: c for m, c in a.num._d.items() if dict(m).get(s.variable, 0) <= s.order}
    if len(keep) == len(a.num._d):
        return a
    return RationalCoefficient(Polynomial(keep), a.den)
