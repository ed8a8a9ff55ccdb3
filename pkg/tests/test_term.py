"""Canonical form: symmetries, delta contraction, dummy renumbering, merging."""
import random

from hypothesis import given
from hypothesis import strategies as st

from conftest import PROP, run
from formlet.algebra import rat, rat_add
from formlet.exec import parse_term_text, term_string
from formlet.term import (
    ANTISYMMETRIC,
    INTERNAL_BASE,
    SYMMETRIC,
    Canon,
    Decls,
    canonicalize_term,
    normalize_expression,
    sum_indices,
)

DECLS_SRC = """
    #-
    symbol d;
    dimension d;
    index A,B,C,E,a,b,c;
    ntensor X,P,T,U,V;
    ctensor S(symmetric), Q(antisymmetric), R;
    cfunction f;
    .end
"""


def session(extra=""):
    return run(DECLS_SRC.replace("    .end", extra + "    .end"))


def terms(text, s):
    return parse_term_text(text, s)


def show(text, s=None):
    s = s or session()
    return [term_string(t, s.decls) for t in terms(text, s)]


def test_symmetric_sorting():
    assert show("S(B,A)") == ["S(A,B)"]


def test_antisymmetric_sign_and_zero():
    assert show("Q(B,A)") == ["-Q(A,B)"]
    assert show("Q(A,A)") == []


def test_delta_trace():
    assert show("d_(A,A)") == ["d"]


def test_delta_contraction_both_orders():
    # frozen: contracting via either side of the delta gives T(a,c)
    s = session()
    one = terms("d_(a,N1_?)*T(N1_?,c)", s)
    two = terms("T(N1_?,c)*d_(N1_?,a)", s)
    assert [term_string(t, s.decls) for t in one] == ["T(a,c)"]
    assert one[0].key == two[0].key


def test_open_delta_stays():
    assert show("d_(A,B)") == ["d_(A,B)"]


def test_keys_ignore_coefficient_but_not_order():
    s = session()
    (t2,) = terms("2*X(A)*P(A,B)", s)
    (t3,) = terms("3*X(A)*P(A,B)", s)
    (t4,) = terms("P(A,B)*X(A)", s)
    assert t2.key == t3.key
    assert t2.key != t4.key


def test_dummy_renumbering():
    # frozen: both relabel to N1
    s = session()
    (a,) = terms("R(N1_?)*S(N1_?,A)", s)
    (b,) = terms("R(N2_?)*S(N2_?,A)", s)
    assert a.key == b.key
    assert term_string(a, s.decls) == "S(A,N1_?)*R(N1_?)"


def test_merge_with_polyratfun():
    s = session("    PolyRatFun f;\n")
    ts = terms("f(1,2)*X(A)", s) + terms("f(1,2)*X(A)", s)
    out = normalize_expression(ts)
    assert len(out) == 1 and out[0].coeff == rat(1)
    assert normalize_expression(terms("X(A)", s) + terms("-X(A)", s)) == []


def test_sum_indices():
    s = session()
    (t,) = terms("X(A)*P(A,B)", s)
    A = s.decls.index_ids["A"]
    out = sum_indices(t, [A], s.canon)
    assert term_string(out, s.decls) == "X(N1_?)*P(N1_?,B)"
    assert sum_indices(t, [s.decls.index_ids["C"]], s.canon) is t


def test_sum_two_indices_sequential():
    # frozen: a -> N1, b -> N2 in statement order
    s = session()
    (t,) = terms("T(a,b)*U(a)*V(b)", s)
    ids = [s.decls.index_ids[n] for n in ("a", "b")]
    assert term_string(sum_indices(t, ids, s.canon), s.decls) == "T(N1_?,N2_?)*U(N1_?)*V(N2_?)"


# -- properties on random raw terms

D = Decls()
OPEN = [D.add_index(n) for n in ("A", "B", "C", "E")]
NC_PLAIN = [D.add_head(n, "ntensor") for n in ("T", "U")]
NC_SYM = D.add_head("W", "ntensor", SYMMETRIC)
C_PLAIN = D.add_head("R", "ctensor")
C_SYM = D.add_head("S", "ctensor", SYMMETRIC)
C_ANTI = D.add_head("Q", "ctensor", ANTISYMMETRIC)
CANON = Canon(D)
HEADS = NC_PLAIN + [NC_SYM, C_PLAIN, C_SYM, C_ANTI]


@st.composite
def raw_terms(draw, with_delta=False):
    nfac = draw(st.integers(1, 5))
    facs = [(draw(st.sampled_from(HEADS)), draw(st.integers(1, 3))) for _ in range(nfac)]
    slots = [(i, k) for i, (_, ar) in enumerate(facs) for k in range(ar)]
    perm = draw(st.permutations(slots))
    npairs = draw(st.integers(0, len(slots) // 2))
    args = {}
    for p in range(npairs):
        args[perm[2 * p]] = INTERNAL_BASE + p + 1
        args[perm[2 * p + 1]] = INTERNAL_BASE + p + 1
    for sl in perm[2 * npairs :]:
        args[sl] = draw(st.sampled_from(OPEN))
    cf, nf = [], []
    for i, (h, ar) in enumerate(facs):
        f = (h, tuple(args[(i, k)] for k in range(ar)))
        (cf if D.is_commuting(h) else nf).append(f)
    return cf, nf


@PROP
@given(raw_terms())
def test_canonicalize_idempotent(raw):
    cf, nf = raw
    t = CANON.make(rat(1), (), cf, nf)
    if t is None:
        return
    t2 = canonicalize_term(t, CANON)
    assert t2 is not None and t2.key == t.key and t2.coeff == t.coeff


@PROP
@given(raw_terms(), st.randoms(use_true_random=False))
def test_dummy_bijection_is_congruence(raw, rnd):
    cf, nf = raw
    dummies = sorted({a for _, args in cf + nf for a in args if a >= INTERNAL_BASE})
    shuffled = dummies[:]
    rnd.shuffle(shuffled)
    m = {a: b + 50 for a, b in zip(dummies, shuffled)}
    ren = lambda fs: [(h, tuple(m.get(a, a) for a in args)) for h, args in fs]
    cf2 = ren(cf)
    rnd.shuffle(cf2)
    t1 = CANON.make(rat(1), (), cf, nf)
    t2 = CANON.make(rat(1), (), cf2, ren(nf))
    if t1 is None:
        assert t2 is None
        return
    assert t2 is not None and t1.key == t2.key and t1.coeff == t2.coeff


@PROP
@given(st.lists(st.sampled_from(OPEN), min_size=2, max_size=2), st.lists(st.sampled_from(OPEN), min_size=1, max_size=3))
def test_antisymmetric_sign_consistency(pair, extra):
    x, y = pair
    a = CANON.make(rat(1), (), [(C_ANTI, (y, x))], [])
    b = CANON.make(rat(1), (), [(C_ANTI, (x, y))], [])
    if x == y:
        assert a is None and b is None
        return
    assert a.key == b.key and rat_add(a.coeff, b.coeff).is_zero()


@PROP
@given(st.permutations([0, 1, 2]), st.sampled_from(OPEN), st.sampled_from(OPEN))
def test_delta_chain_collapse(order, a, c):
    n1, n2 = INTERNAL_BASE + 1, INTERNAL_BASE + 2
    facs = [(0, (a, n1)), (0, (n1, n2)), (C_PLAIN, (n2, c))]
    t = CANON.make(rat(1), (), [facs[i] for i in order], [])
    ref = CANON.make(rat(1), (), [(C_PLAIN, (a, c))], [])
    assert t.key == ref.key and t.coeff == ref.coeff


@PROP
@given(st.lists(raw_terms(), min_size=1, max_size=5), st.lists(st.integers(-3, 3), min_size=5, max_size=5), st.randoms(use_true_random=False))
def test_normalize_order_independent(raws, coeffs, rnd):
    ts = [CANON.make(rat(c or 1), (), cf, nf) for (cf, nf), c in zip(raws, coeffs)]
    ts = [t for t in ts if t is not None]
    ts = ts + ts[:1]
    out = normalize_expression(ts)
    shuffled = ts[:]
    rnd.shuffle(shuffled)
    assert normalize_expression(shuffled) == out
    assert normalize_expression(out) == out
