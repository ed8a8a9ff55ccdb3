"""Interpreter: statements, modules, stores and rendering."""
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from conftest import PROP, dumped, run
from formlet.errors import RepeatDivergence, UnknownName
from formlet.exec import term_string


def test_if_occurs():
    out = dumped("""
        Symbols x,y;
        Local e = y*x^2 + y;
        if (occurs(x)=1) id y = 1;
        .end
    """)
    # the y-only term fails the test and keeps its y
    assert sorted(out["e"]) == ["x^2", "y"]


def test_repeat_hand_trace():
    # h(0)*h(2)*end -> h(0)*end*drat(d+2,1) -> end*drat(d,1)*drat(d+2,1)
    out = dumped("""
        #define dpp "d"
        Symbols d,x;
        Functions h,end;
        PolyRatFun drat;
        Local e = h(0)*h(2)*end;
        repeat id h(x?)*end = end*drat('dpp'+x,1);
        .end
    """)
    assert out == {"e": ["end*drat(d^2 + 2*d,1)"]}


def test_repeat_on_fixed_expression_single_pass():
    sess = run("""
        Symbols a,b;
        Local e = b;
        repeat id a = b;
        .end
    """)
    assert [p for _, p in sess.stats[0].repeat_passes] == [1]


def test_repeat_divergence():
    with pytest.raises(RepeatDivergence) as ei:
        run("""
            Symbols a,b;
            Local e = a;
            repeat id a = a*b;
            .end
        """, repeat_cap=50)
    assert ei.value.cap == 50


def test_local_zero_and_declarations_only():
    sess = run("""
        Symbol a;
        Local e = 0;
        .end
    """)
    assert sess.exprs == {"e": []}
    sess = run("""
        Symbols a,b;
        .end
    """)
    assert sess.outputs == [] and sess.exprs == {}


def test_hide_splice():
    sess = run("""
        Symbols X,Y,Z;
        Local expr1 = Y;
        .sort
        hide expr1;
        .sort
        Local expr2 = Y + expr1;
        id Y = Z;
        .sort
        unhide expr1;
        print;
        .end
    """)
    out = {n: [term_string(t, sess.decls) for t in ts] for n, ts in sess.exprs.items()}
    assert out == {"expr1": ["Y"], "expr2": ["2*Z"]}


def test_unknown_name_in_local():
    with pytest.raises(UnknownName):
        run("""
            Symbol a;
            Local e = a + nothere;
            .end
        """)


def test_autodeclare_prefix():
    out = dumped("""
        Autodeclare index a,b;
        CTensor T;
        Local e = T(ap,bp)*T(ap,bp);
        .end
    """)
    assert out == {"e": ["T(ap,bp)*T(ap,bp)"]}


def test_internal_numbering_restarts_per_module():
    out = dumped("""
        Index A,B,C;
        CTensor T;
        Local e = T(A,B)*T(B,C);
        sum B;
        .sort
        Local f = T(A,B)*T(B,C);
        sum B;
        .end
    """)
    assert out["e"] == out["f"] == ["T(A,N1_?)*T(N1_?,C)"]


def test_print_plus_s_and_format():
    sess = run("""
        Symbols a,b,c;
        Format 20;
        Local e = (a+b+c)^3;
        print +s;
        .end
    """)
    (ev,) = sess.outputs
    assert ev.lines[0].strip() == "e ="
    assert all(len(ln) <= 20 for ln in ev.lines)
    assert ev.lines[-1].endswith(";")
    assert len(ev.terms) == 10


def test_bracket_rendering():
    sess = run("""
        Symbols a,b,c;
        Local e = a*b + a*c + b;
        bracket a;
        print;
        .end
    """)
    text = sess.outputs[0].text
    assert "a * (" in text.replace("\n", " ")


# -- properties over random symbol programs

SYMS = ["a", "b", "c"]
MONO = st.lists(st.sampled_from(SYMS), min_size=0, max_size=3).map(lambda xs: "*".join(xs) or "1")
EXPR = st.lists(st.tuples(st.integers(-3, 3).filter(bool), MONO), min_size=1, max_size=5)
LHS = st.lists(st.sampled_from(SYMS), min_size=1, max_size=2).map("*".join)
RULE = st.tuples(LHS, MONO, st.booleans())


def _expr_text(terms):
    return " + ".join(f"({k})*{m}" for k, m in terms)


def _id(rule):
    lhs, rhs, once = rule
    return f"id {'once ' if once else ''}{lhs} = {rhs};"


def _norm(sess, name):
    return Counter(term_string(t, sess.decls) for t in sess.exprs[name])


HEAD = "Symbols a,b,c;\n"


@PROP
@given(EXPR, EXPR, st.lists(RULE, min_size=1, max_size=4))
def test_hidden_isolation(e1, e2, rules):
    base = HEAD + f"Local h = {_expr_text(e1)};\nLocal e = {_expr_text(e2)};\n.sort\n"
    ref = run(base + ".end")
    body = "\n".join(_id(r) for r in rules)
    sess = run(base + f"hide h;\n.sort\n{body}\n.sort\nunhide h;\n.end")
    assert _norm(sess, "h") == _norm(ref, "h")


# rules whose left side has two factors and right side at most one shrink
# the degree, so repeat always terminates
SHRINK = st.tuples(
    st.lists(st.sampled_from(SYMS), min_size=2, max_size=2).map("*".join),
    st.sampled_from(SYMS + ["1"]),
    st.just(False),
)


@PROP
@given(EXPR, st.lists(SHRINK, min_size=1, max_size=3))
def test_repeat_fixpoint(e, rules):
    body = "\n".join(_id(r) for r in rules)
    prog = HEAD + f"Local e = {_expr_text(e)};\nrepeat;\n{body}\nendrepeat;\n.sort\n"
    done = run(prog + ".end")
    again = run(prog + body + "\n.end")
    assert _norm(again, "e") == _norm(done, "e")


@PROP
@given(EXPR, st.lists(RULE, min_size=1, max_size=3))
def test_term_independence(e, rules):
    body = "\n".join(_id(r) for r in rules)
    whole = run(HEAD + f"Local e = {_expr_text(e)};\n{body}\n.end")
    parts = "\n".join(f"Local p{i} = ({k})*{m};" for i, (k, m) in enumerate(e))
    names = " + ".join(f"p{i}" for i in range(len(e)))
    split = run(HEAD + f"{parts}\n{body}\n.sort\nLocal s = {names};\n.end")
    assert _norm(split, "s") == _norm(whole, "e")


TENSOR_PROG = """
    Index A,B,C,D,E;
    CTensor S(symmetric),T;
    Function start,end;
    Local e = start*T(A,B)*S(B,C)*T(C,D)*end + {extra};
    sum B,C;
    print;
    .end
"""


@PROP
@given(st.lists(st.sampled_from(["T(A,D)", "S(D,A)", "T(E,E)", "start*end"]), min_size=1, max_size=3))
def test_determinism(extra):
    src = TENSOR_PROG.format(extra="*".join(extra))
    a, b = run(src), run(src)
    assert [ev.lines for ev in a.outputs] == [ev.lines for ev in b.outputs]
    assert dumped(src) == {n: [term_string(t, a.decls) for t in ts] for n, ts in a.exprs.items()}


def test_numeric_coefficients_plain_outside_plus_s():
    sess = run("""
        Symbols x;
        CFunction g;
        PolyRatFun f;
        Local e = 2*g(1) + f(1,x)*g(x);
        print;
        .sort
        print +s;
        .end
    """)
    plain, signed = (" ".join(ev.lines) for ev in sess.outputs)
    assert "2*g(1)" in plain and "g(x)*f(1,x)" in plain
    assert "+ g(1)*f(2,1)" in signed
